//! Model bundle: the fitted encoders, classifiers and fusion weights of a
//! pipeline trained on every game of a dataset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, ScoreSet, TrainedModel};
use crate::data::GameDataset;
use crate::error::{Error, Result};
use crate::evaluation::experiment::{score_players, EncodingChoice, PipelineFit};
use crate::evaluation::features::{Cohort, FittedEncoder};
use crate::fusion::{fuse, FusionWeights};
use crate::sampling::SamplingPolicy;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFamily {
    pub name: String,
    pub channels: Vec<String>,
    pub kind: ClassifierKind,
    pub choice: EncodingChoice,
    pub inner_auc: f64,
    pub encoder: FittedEncoder,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub seed: u64,
    pub train_games: Vec<String>,
    pub sampling: SamplingPolicy,
    pub families: Vec<BundleFamily>,
    pub weights: FusionWeights,
    pub validation_auc: f64,
}

/// Fused and per-family scores of a scored dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleScores {
    pub fused: ScoreSet,
    pub families: Vec<(String, ScoreSet)>,
}

impl ModelBundle {
    /// Keeps the chosen classifier of each family.
    pub fn from_fit(fit: &PipelineFit, channels: &[Vec<String>], sampling: &SamplingPolicy, seed: u64) -> Self {
        ModelBundle {
            format_version: BUNDLE_VERSION,
            seed,
            train_games: fit.train_games.clone(),
            sampling: sampling.clone(),
            families: fit
                .families
                .iter()
                .zip(channels)
                .map(|(f, ch)| {
                    let k = f.chosen_fit();
                    BundleFamily {
                        name: f.family.clone(),
                        channels: ch.clone(),
                        kind: k.kind,
                        choice: k.choice.clone(),
                        inner_auc: k.inner_auc,
                        encoder: k.encoder.clone(),
                        model: k.model.clone(),
                    }
                })
                .collect(),
            weights: fit.weights.clone(),
            validation_auc: fit.validation_auc,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: ModelBundle = serde_json::from_str(&text)?;
        if b.format_version != BUNDLE_VERSION {
            return Err(Error::schema(
                path.display().to_string(),
                format!("unsupported bundle format_version {}", b.format_version),
            ));
        }
        Ok(b)
    }

    /// Channels any family reads.
    pub fn channels(&self) -> Vec<String> {
        let mut c: Vec<String> = self.families.iter().flat_map(|f| f.channels.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Scores every player of `ds`.
    pub fn score(&self, ds: &GameDataset) -> Result<BundleScores> {
        let cohort = Cohort::load(ds, &self.channels(), &self.sampling)?;
        self.score_cohort(&cohort)
    }

    pub fn score_cohort(&self, cohort: &Cohort) -> Result<BundleScores> {
        let idx: Vec<usize> = (0..cohort.players.len()).collect();
        let families = self
            .families
            .iter()
            .map(|f| Ok((f.name.clone(), score_players(&f.encoder, &f.model, cohort, &idx)?)))
            .collect::<Result<Vec<_>>>()?;
        let sets: Vec<&ScoreSet> = families.iter().map(|(_, s)| s).collect();
        let fused = fuse(&sets, &self.weights)?;
        Ok(BundleScores { fused, families })
    }
}
