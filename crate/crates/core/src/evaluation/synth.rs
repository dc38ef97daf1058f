//! Synthetic game datasets with planted spy effects.
//!
//! Each player and scalar channel dim gets a latent mean drawn from
//! N(effect * is_spy, 1). The emitted series is that mean plus a stationary
//! AR(1) drift and white noise. Effects are therefore in units of the
//! between-player standard deviation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{write_manifest, write_rows, ChannelSpec, DimRef, Game, GameDataset, PlayerRecord, Role, SampleRate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_games: usize,
    pub players_per_game: (usize, usize),
    pub spies_per_game: (usize, usize),
    pub duration_s: (f64, f64),
    pub channels: Vec<ChannelSpec>,
    /// Spy mean shift keyed by `channel[i]`, or by a bare channel name for
    /// every dim of that channel.
    pub effects: BTreeMap<String, f64>,
    /// Stationary standard deviation of the slow drift.
    pub drift_sd: f64,
    /// Drift correlation time in seconds.
    pub drift_tau_s: f64,
    pub noise_sd: f64,
    pub decimals: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_games: 20,
            players_per_game: (5, 8),
            spies_per_game: (2, 3),
            duration_s: (1800.0, 3900.0),
            channels: default_channels(),
            effects: BTreeMap::new(),
            drift_sd: 0.5,
            drift_tau_s: 60.0,
            noise_sd: 1.0,
            decimals: 4,
            seed: 0,
        }
    }
}

/// Channel layout matching the default experiment families.
pub fn default_channels() -> Vec<ChannelSpec> {
    vec![
        ChannelSpec::frame("face_embedding", 8, 1.0),
        ChannelSpec::frame("fau", 4, 1.0),
        ChannelSpec::frame("emotion", 4, 1.0),
        ChannelSpec::frame("eye_head", 4, 1.0),
        ChannelSpec::sub_second("mfcc", 6, 0.5),
    ]
}

impl SyntheticSpec {
    /// Effect sizes of `effect` on the given `channel[i]` (or channel) keys.
    pub fn with_effects(mut self, keys: &[&str], effect: f64) -> Self {
        for k in keys {
            self.effects.insert(k.to_string(), effect);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synthetic spec: {m}")));
        if self.n_games == 0 {
            return bad("n_games must be >= 1");
        }
        let (pmin, pmax) = self.players_per_game;
        let (smin, smax) = self.spies_per_game;
        if pmin == 0 || pmin > pmax || smin > smax || smax >= pmin || smin == 0 {
            return bad("need 1 <= spies < players and ordered ranges");
        }
        let (dmin, dmax) = self.duration_s;
        if !(dmin.is_finite() && dmax.is_finite() && dmin > 0.0 && dmin <= dmax) {
            return bad("duration range must be positive and ordered");
        }
        if self.channels.is_empty() {
            return bad("no channels");
        }
        for (k, &e) in &self.effects {
            if !(e.is_finite() && e >= 0.0) {
                return bad("effect sizes must be finite and >= 0");
            }
            let (name, index) = match DimRef::parse(k) {
                Some(d) => (d.channel, Some(d.index)),
                None => (k.clone(), None),
            };
            match self.channels.iter().find(|c| c.name == name) {
                Some(c) if index.is_none_or(|i| i < c.dim) => {}
                _ => return bad(&format!("effect key {k} names no channel dim")),
            }
        }
        for v in [self.drift_sd, self.drift_tau_s, self.noise_sd] {
            if !(v.is_finite() && v >= 0.0) {
                return bad("noise parameters must be finite and >= 0");
            }
        }
        if self.drift_tau_s == 0.0 && self.drift_sd > 0.0 {
            return bad("drift_tau_s must be > 0 when drift_sd > 0");
        }
        Ok(())
    }

    pub fn effect(&self, channel: &str, index: usize) -> f64 {
        self.effects
            .get(&format!("{channel}[{index}]"))
            .or_else(|| self.effects.get(channel))
            .copied()
            .unwrap_or(0.0)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Per-channel sample times covering `[0, duration)`.
fn timestamps(rate: SampleRate, duration: f64) -> Vec<f64> {
    let period = rate.period_s();
    let n = (duration / period - 1e-9).ceil().max(1.0) as usize;
    (0..n).map(|i| i as f64 * period).collect()
}

/// Writes the dataset under `dir` (manifest plus one CSV per player and
/// channel) and returns it loaded from the written manifest.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<GameDataset> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut games = Vec::with_capacity(spec.n_games);
    let width = spec.n_games.to_string().len().max(2);
    for g in 0..spec.n_games {
        let game_id = format!("g{g:0width$}");
        let n = rng.gen_range(spec.players_per_game.0..=spec.players_per_game.1);
        let spies = rng.gen_range(spec.spies_per_game.0..=spec.spies_per_game.1);
        let mut roles: Vec<Role> = (0..n)
            .map(|i| if i < spies { Role::Spy } else { Role::Resistance })
            .collect();
        roles.shuffle(&mut rng);
        let duration = rng.gen_range(spec.duration_s.0..=spec.duration_s.1);
        let duration = (duration * 1000.0).round() / 1000.0;
        let mut players = Vec::with_capacity(n);
        for (p, role) in roles.into_iter().enumerate() {
            let player_id = format!("{game_id}_p{p}");
            let spy = f64::from(u8::from(role == Role::Spy));
            let mut files = BTreeMap::new();
            for ch in &spec.channels {
                let rel = PathBuf::from(&game_id).join(&player_id).join(format!("{}.csv", ch.name));
                let ts = timestamps(ch.rate, duration);
                let d = ch.dim;
                let mut values = vec![0.0; ts.len() * d];
                let rho = if spec.drift_tau_s > 0.0 {
                    (-ch.rate.period_s() / spec.drift_tau_s).exp()
                } else {
                    0.0
                };
                let innov = spec.drift_sd * (1.0 - rho * rho).sqrt();
                for j in 0..d {
                    let mu = spec.effect(&ch.name, j) * spy + normal(&mut rng);
                    let mut drift = spec.drift_sd * normal(&mut rng);
                    for i in 0..ts.len() {
                        if i > 0 {
                            drift = rho * drift + innov * normal(&mut rng);
                        }
                        values[i * d + j] = mu + drift + spec.noise_sd * normal(&mut rng);
                    }
                }
                write_rows(&dir.join(&rel), &ts, &values, d, Some(spec.decimals))?;
                files.insert(ch.name.clone(), rel);
            }
            players.push(PlayerRecord {
                player_id,
                role,
                channel_files: files,
            });
        }
        games.push(Game {
            game_id,
            duration_s: duration,
            players,
        });
    }
    let ds = GameDataset {
        games,
        feature_channels: spec.channels.clone(),
        source_dir: dir.to_path_buf(),
    };
    let manifest = dir.join("manifest.json");
    write_manifest(&ds, &manifest)?;
    crate::data::load_manifest(&manifest)
}
