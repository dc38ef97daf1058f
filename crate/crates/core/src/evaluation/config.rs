//! Experiment configuration.

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, Hyperparams};
use crate::data::{DimRef, GameDataset};
use crate::encoders::{HistogramMode, Normalize};
use crate::error::{Error, Result};
use crate::fusion::{grid_units, MAX_CANDIDATES};
use crate::sampling::SamplingPolicy;

/// How a family turns clips into one vector per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoder", rename_all = "snake_case")]
pub enum EncoderConfig {
    /// Histograms over scalar dims of the family's channels. Every
    /// (mode, bins) pair and every non-empty subset of the candidate dims is
    /// searched.
    Histogram {
        modes: Vec<HistogramMode>,
        bins: Vec<usize>,
        #[serde(default)]
        normalize: Normalize,
        /// `channel[i]` names; empty means every dim of the family channels.
        #[serde(default)]
        candidate_dims: Vec<String>,
    },
    /// Fisher Vector over the concatenated clip vectors of the family
    /// channels, optionally followed by the univariate dim filter and the
    /// cross-game rank transform.
    FisherVector {
        components: usize,
        #[serde(default = "yes")]
        normalize: bool,
        #[serde(default)]
        select_dims: Option<usize>,
        #[serde(default)]
        liarrank: bool,
        #[serde(default)]
        liarrank_normalize: bool,
        #[serde(default = "default_max_points")]
        max_points: Option<usize>,
        #[serde(default = "default_gmm_iters")]
        max_iters: usize,
    },
}

fn yes() -> bool {
    true
}

fn default_max_points() -> Option<usize> {
    Some(4000)
}

fn default_gmm_iters() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub name: String,
    pub channels: Vec<String>,
    #[serde(flatten)]
    pub encoder: EncoderConfig,
}

impl FamilyConfig {
    pub fn histogram(name: &str, channel: &str) -> Self {
        FamilyConfig {
            name: name.to_string(),
            channels: vec![channel.to_string()],
            encoder: EncoderConfig::Histogram {
                modes: vec![HistogramMode::Combined],
                bins: vec![4, 8, 16, 32],
                normalize: Normalize::Frequencies,
                candidate_dims: Vec::new(),
            },
        }
    }

    pub fn fisher(name: &str, channel: &str, select_dims: Option<usize>, liarrank: bool) -> Self {
        FamilyConfig {
            name: name.to_string(),
            channels: vec![channel.to_string()],
            encoder: EncoderConfig::FisherVector {
                components: 32,
                normalize: true,
                select_dims,
                liarrank,
                liarrank_normalize: false,
                max_points: default_max_points(),
                max_iters: default_gmm_iters(),
            },
        }
    }

    /// Candidate scalar dims of a histogram family, resolved against the
    /// dataset's channel declarations.
    pub fn candidate_dims(&self, ds: &GameDataset) -> Result<Vec<DimRef>> {
        let EncoderConfig::Histogram { candidate_dims, .. } = &self.encoder else {
            return Ok(Vec::new());
        };
        let dims = if candidate_dims.is_empty() {
            let mut out = Vec::new();
            for name in &self.channels {
                let ch = ds
                    .channel(name)
                    .ok_or_else(|| Error::InvalidConfig(format!("family {}: unknown channel {name}", self.name)))?;
                out.extend((0..ch.dim).map(|i| DimRef::new(name, i)));
            }
            out
        } else {
            candidate_dims
                .iter()
                .map(|s| {
                    let d = DimRef::parse(s)
                        .ok_or_else(|| Error::InvalidConfig(format!("family {}: bad dim {s}", self.name)))?;
                    let ok = self.channels.contains(&d.channel)
                        && ds.channel(&d.channel).is_some_and(|c| d.index < c.dim);
                    if ok {
                        Ok(d)
                    } else {
                        Err(Error::InvalidConfig(format!("family {}: dim {s} not in its channels", self.name)))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        };
        if dims.len() > MAX_CANDIDATES {
            return Err(Error::TooManyChannels(dims.len()));
        }
        Ok(dims)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSearchConfig {
    pub enabled: bool,
    pub grid_step: f64,
    pub top_n: usize,
}

impl Default for EnsembleSearchConfig {
    fn default() -> Self {
        EnsembleSearchConfig {
            enabled: true,
            grid_step: 0.2,
            top_n: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub folds: usize,
    /// Game-disjoint folds used inside each training split for every
    /// selection step.
    pub inner_folds: usize,
    pub seed: u64,
    pub sampling: SamplingPolicy,
    pub families: Vec<FamilyConfig>,
    pub classifier_kinds: Vec<ClassifierKind>,
    pub hyperparams: Hyperparams,
    pub grid_step: f64,
    pub threshold: f64,
    pub ensemble_search: EnsembleSearchConfig,
    pub ablation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: 10,
            inner_folds: 3,
            seed: 0,
            sampling: SamplingPolicy::default(),
            families: vec![
                FamilyConfig::histogram("fau_hist", "fau"),
                FamilyConfig::fisher("mfcc_fv", "mfcc", None, false),
                FamilyConfig::histogram("emotion_hist", "emotion"),
                FamilyConfig::histogram("eyehead_hist", "eye_head"),
                FamilyConfig::fisher("liarrank_fv", "face_embedding", Some(16), true),
            ],
            classifier_kinds: ClassifierKind::ALL.to_vec(),
            hyperparams: Hyperparams::default(),
            grid_step: 0.1,
            threshold: 0.5,
            ensemble_search: EnsembleSearchConfig::default(),
            ablation: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks the config on its own and against the dataset's channels.
    pub fn validate(&self, ds: &GameDataset) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.sampling.validate()?;
        if self.folds < 2 {
            return bad("folds must be >= 2".into());
        }
        if self.inner_folds < 2 {
            return bad("inner_folds must be >= 2".into());
        }
        if self.families.is_empty() {
            return bad("no families".into());
        }
        if self.classifier_kinds.is_empty() {
            return bad("no classifier kinds".into());
        }
        grid_units(self.grid_step)?;
        if self.ensemble_search.enabled {
            grid_units(self.ensemble_search.grid_step)?;
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]".into());
        }
        if !(self.hyperparams.l2_strength > 0.0) || self.hyperparams.knn_k == 0 || self.hyperparams.rf_trees == 0 {
            return bad("hyperparameters out of range".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for f in &self.families {
            if !names.insert(f.name.as_str()) {
                return bad(format!("family {} declared twice", f.name));
            }
            if f.channels.is_empty() {
                return bad(format!("family {} has no channels", f.name));
            }
            for c in &f.channels {
                if ds.channel(c).is_none() {
                    return bad(format!("family {}: unknown channel {c}", f.name));
                }
            }
            match &f.encoder {
                EncoderConfig::Histogram { modes, bins, .. } => {
                    if modes.is_empty() || bins.is_empty() || bins.iter().any(|&b| b < 2) {
                        return bad(format!("family {}: need modes and bins >= 2", f.name));
                    }
                    if f.candidate_dims(ds)?.is_empty() {
                        return bad(format!("family {}: no candidate dims", f.name));
                    }
                }
                EncoderConfig::FisherVector {
                    components, select_dims, ..
                } => {
                    if *components == 0 || *select_dims == Some(0) {
                        return bad(format!("family {}: components and select_dims must be >= 1", f.name));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert_eq!(c.families.len(), 5);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = ExperimentConfig::from_json(r#"{"folds": 4, "seed": 3}"#).unwrap();
        assert_eq!(c.folds, 4);
        assert_eq!(c.grid_step, 0.1);
        let f = ExperimentConfig::from_json(
            r#"{"families": [{"name": "x", "channels": ["fau"], "encoder": "fisher_vector", "components": 4}]}"#,
        )
        .unwrap();
        assert!(matches!(
            f.families[0].encoder,
            EncoderConfig::FisherVector { components: 4, normalize: true, .. }
        ));
    }

    #[test]
    fn unknown_field_type_is_invalid() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"folds": "ten"}"#),
            Err(Error::InvalidConfig(_))
        ));
    }
}
