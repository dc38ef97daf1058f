//! Per-family player encodings fitted on a set of training players.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ChannelSpec, DimRef, GameDataset};
use crate::encoders::fisher::encode_fisher_vector;
use crate::encoders::gmm::{fit_gmm, GmmConfig, GmmModel};
use crate::encoders::histogram::{encode_histogram, HistogramEncoding, HistogramMode, Normalize};
use crate::error::{Error, Result};
use crate::fusion::select_dims;
use crate::liarrank::{build_corpus, liarrank_vector, GameRoster, LiarRankCorpus};
use crate::matrix::Matrix;
use crate::sampling::{clips_for_player, PlayerClips, SamplingPolicy};

/// One player with its sampled clips.
#[derive(Debug, Clone)]
pub struct PlayerEntry {
    pub game_id: String,
    pub player_id: String,
    pub label: u8,
    pub clips: PlayerClips,
}

/// Every player of a dataset, clipped once and shared by all folds.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub players: Vec<PlayerEntry>,
}

impl Cohort {
    /// Loads and clips every player on `channels` (all dataset channels when
    /// empty), in manifest order.
    pub fn load(ds: &GameDataset, channels: &[String], policy: &SamplingPolicy) -> Result<Self> {
        let specs: Vec<ChannelSpec> = if channels.is_empty() {
            ds.feature_channels.clone()
        } else {
            ds.feature_channels
                .iter()
                .filter(|c| channels.contains(&c.name))
                .cloned()
                .collect()
        };
        let jobs: Vec<_> = ds.players().collect();
        let players = jobs
            .par_iter()
            .map(|(g, p)| {
                Ok(PlayerEntry {
                    game_id: g.game_id.clone(),
                    player_id: p.player_id.clone(),
                    label: p.role.label(),
                    clips: clips_for_player(ds, p, &specs, policy)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Cohort { players })
    }

    /// Indices of the players belonging to `games`, in cohort order.
    pub fn indices_of(&self, games: &[String]) -> Vec<usize> {
        let set: BTreeSet<&str> = games.iter().map(String::as_str).collect();
        (0..self.players.len())
            .filter(|&i| set.contains(self.players[i].game_id.as_str()))
            .collect()
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<u8> {
        idx.iter().map(|&i| self.players[i].label).collect()
    }

    pub fn player_ids(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.players[i].player_id.clone()).collect()
    }

    /// Sorted distinct game ids of the given players.
    pub fn games_of(&self, idx: &[usize]) -> Vec<String> {
        let set: BTreeSet<&str> = idx.iter().map(|&i| self.players[i].game_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    fn rosters(&self, idx: &[usize]) -> Vec<GameRoster> {
        let mut games: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for &i in idx {
            let p = &self.players[i];
            games.entry(&p.game_id).or_default().push(p.player_id.clone());
        }
        games
            .into_iter()
            .map(|(g, player_ids)| GameRoster {
                game_id: g.to_string(),
                player_ids,
            })
            .collect()
    }
}

/// Clip vectors of `channels` concatenated side by side, one row per clip.
pub fn clip_matrix(clips: &PlayerClips, channels: &[String]) -> Result<Matrix> {
    let parts = channels
        .iter()
        .map(|c| {
            clips
                .channels
                .get(c)
                .ok_or_else(|| Error::EmptyInput(format!("channel {c} missing")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = parts.first().map_or(0, |p| p.clips.len());
    let width: usize = parts.iter().map(|p| p.channel.dim).sum();
    let mut out = Matrix::zeros(rows, width);
    for r in 0..rows {
        let row = out.row_mut(r);
        let mut at = 0;
        for p in &parts {
            let v = &p.clips[r].vector;
            row[at..at + v.len()].copy_from_slice(v);
            at += v.len();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStage {
    pub corpus: LiarRankCorpus,
    pub normalize: bool,
}

/// Fisher Vector encoder with optional dim filter and rank transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherEncoder {
    pub channels: Vec<String>,
    pub gmm: GmmModel,
    pub normalize: bool,
    /// Kept FV dims, ascending; `None` keeps all.
    pub selected_dims: Option<Vec<usize>>,
    pub rank: Option<RankStage>,
    pub fitted_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherParams {
    pub components: usize,
    pub normalize: bool,
    pub select_dims: Option<usize>,
    pub liarrank: bool,
    pub liarrank_normalize: bool,
    pub max_points: Option<usize>,
    pub max_iters: usize,
}

impl FisherEncoder {
    fn raw(&self, clips: &PlayerClips) -> Result<Vec<f64>> {
        encode_fisher_vector(&clip_matrix(clips, &self.channels)?, &self.gmm, self.normalize)
    }

    fn finish(&self, player_id: &str, fv: &[f64]) -> Result<Vec<f64>> {
        if let Some(stage) = &self.rank {
            return Ok(liarrank_vector(&stage.corpus, player_id, fv)?.to_features(stage.normalize));
        }
        Ok(match &self.selected_dims {
            Some(d) => d.iter().map(|&j| fv[j]).collect(),
            None => fv.to_vec(),
        })
    }

    pub fn encode(&self, player_id: &str, clips: &PlayerClips) -> Result<Vec<f64>> {
        self.finish(player_id, &self.raw(clips)?)
    }

    /// Fits the mixture on the training players' clips, then the dim filter
    /// and the rank corpus on their Fisher Vectors.
    pub fn fit(cohort: &Cohort, train: &[usize], channels: &[String], p: &FisherParams, seed: u64) -> Result<Self> {
        let mats = train
            .iter()
            .map(|&i| clip_matrix(&cohort.players[i].clips, channels))
            .collect::<Result<Vec<_>>>()?;
        let width = mats.first().map_or(0, Matrix::cols);
        let total: usize = mats.iter().map(Matrix::rows).sum();
        let mut data = Vec::with_capacity(total * width);
        for m in &mats {
            data.extend_from_slice(m.as_slice());
        }
        let stacked = Matrix::from_vec(total, width, data)?;
        let cfg = GmmConfig {
            components: p.components,
            max_iters: p.max_iters,
            max_points: p.max_points,
            seed,
            ..GmmConfig::default()
        };
        let fitted_on = cohort.games_of(train);
        let mut gmm = fit_gmm(&stacked, &cfg)?;
        gmm.fitted_on = fitted_on.clone();
        let mut enc = FisherEncoder {
            channels: channels.to_vec(),
            gmm,
            normalize: p.normalize,
            selected_dims: None,
            rank: None,
            fitted_on,
        };
        if p.select_dims.is_none() && !p.liarrank {
            return Ok(enc);
        }
        let fvs = mats
            .iter()
            .map(|m| encode_fisher_vector(m, &enc.gmm, enc.normalize))
            .collect::<Result<Vec<_>>>()?;
        let fv_matrix = Matrix::from_rows(&fvs)?;
        let dims = match p.select_dims {
            Some(m) => select_dims(&fv_matrix, &cohort.labels(train), m)?,
            None => (0..fv_matrix.cols()).collect(),
        };
        if p.liarrank {
            let features: BTreeMap<String, Vec<f64>> = train
                .iter()
                .zip(fvs)
                .map(|(&i, fv)| (cohort.players[i].player_id.clone(), fv))
                .collect();
            let corpus = build_corpus(&cohort.rosters(train), &features, &dims)?;
            enc.rank = Some(RankStage {
                corpus,
                normalize: p.liarrank_normalize,
            });
        }
        enc.selected_dims = Some(dims);
        Ok(enc)
    }
}

/// A family encoder fitted on training players only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedEncoder {
    Histogram(HistogramEncoding),
    Fisher(Box<FisherEncoder>),
}

impl FittedEncoder {
    pub fn fit_histogram(
        cohort: &Cohort,
        train: &[usize],
        mode: HistogramMode,
        dims: Vec<DimRef>,
        bins: usize,
        normalize: Normalize,
    ) -> Result<Self> {
        let clips: Vec<&PlayerClips> = train.iter().map(|&i| &cohort.players[i].clips).collect();
        Ok(FittedEncoder::Histogram(HistogramEncoding::fit(
            mode,
            dims,
            bins,
            normalize,
            &clips,
            cohort.games_of(train),
        )?))
    }

    pub fn fitted_on(&self) -> &[String] {
        match self {
            FittedEncoder::Histogram(h) => &h.fitted_on,
            FittedEncoder::Fisher(f) => &f.fitted_on,
        }
    }

    pub fn encode(&self, player: &PlayerEntry) -> Result<Vec<f64>> {
        match self {
            FittedEncoder::Histogram(h) => encode_histogram(&player.clips, h),
            FittedEncoder::Fisher(f) => f.encode(&player.player_id, &player.clips),
        }
    }

    /// Feature matrix of the given cohort players, one row each.
    pub fn encode_rows(&self, cohort: &Cohort, idx: &[usize]) -> Result<Matrix> {
        let rows = idx
            .par_iter()
            .map(|&i| self.encode(&cohort.players[i]))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, 0));
        }
        Matrix::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::synth::{generate_synthetic, SyntheticSpec};

    fn cohort() -> (tempfile::TempDir, Cohort) {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            n_games: 3,
            duration_s: (120.0, 150.0),
            seed: 2,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec, dir.path()).unwrap();
        let c = Cohort::load(&ds, &[], &SamplingPolicy::default()).unwrap();
        (dir, c)
    }

    #[test]
    fn fisher_with_ranks_records_training_games() {
        let (_dir, c) = cohort();
        let train = c.indices_of(&["g00".to_string(), "g01".to_string()]);
        let test = c.indices_of(&["g02".to_string()]);
        let p = FisherParams {
            components: 2,
            normalize: true,
            select_dims: Some(3),
            liarrank: true,
            liarrank_normalize: false,
            max_points: None,
            max_iters: 20,
        };
        let enc = FisherEncoder::fit(&c, &train, &["face_embedding".to_string()], &p, 1).unwrap();
        assert_eq!(enc.fitted_on, vec!["g00", "g01"]);
        let enc = FittedEncoder::Fisher(Box::new(enc));
        let x = enc.encode_rows(&c, &test).unwrap();
        // 3 dims ranked against 2 training games
        assert_eq!(x.cols(), 6);
        assert!(x.as_slice().iter().all(|&r| r >= 1.0 && r <= 9.0));
    }

    #[test]
    fn clip_matrix_concatenates_channels() {
        let (_dir, c) = cohort();
        let p = &c.players[0];
        let m = clip_matrix(&p.clips, &["fau".to_string(), "mfcc".to_string()]).unwrap();
        assert_eq!(m.cols(), 4 + 6);
        assert_eq!(m.rows(), p.clips.clip_count());
        assert_eq!(&m.row(1)[4..], &p.clips.channels["mfcc"].clips[1].vector[..]);
    }
}
