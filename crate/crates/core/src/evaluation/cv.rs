//! Game-disjoint fold assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::GameDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
    pub seed: u64,
}

/// Train and test game ids of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train_games: Vec<String>,
    pub test_games: Vec<String>,
}

/// Seeded shuffle of the (sorted) game ids followed by round-robin
/// assignment, so fold sizes differ by at most one game.
pub fn make_cv_plan<S: AsRef<str>>(game_ids: &[S], k: usize, seed: u64) -> Result<CvPlan> {
    if k < 2 || k > game_ids.len() {
        return Err(Error::TooFewGames {
            games: game_ids.len(),
            folds: k,
        });
    }
    let mut ids: Vec<String> = game_ids.iter().map(|g| g.as_ref().to_string()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() != game_ids.len() {
        return Err(Error::InvalidConfig("duplicate game ids in plan".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignment = ids.into_iter().enumerate().map(|(i, g)| (g, i % k)).collect();
    Ok(CvPlan { k, assignment, seed })
}

impl CvPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn folds(&self) -> Vec<Fold> {
        (0..self.k)
            .map(|f| {
                let (test, train): (Vec<_>, Vec<_>) = self.assignment.iter().partition(|(_, &a)| a == f);
                Fold {
                    index: f,
                    train_games: train.into_iter().map(|(g, _)| g.clone()).collect(),
                    test_games: test.into_iter().map(|(g, _)| g.clone()).collect(),
                }
            })
            .collect()
    }
}

/// Refuses folds whose train and test sides share a game or a player, or
/// that name games absent from the dataset.
pub fn check_disjoint(fold: &Fold, ds: &GameDataset) -> Result<()> {
    let train: BTreeSet<&str> = fold.train_games.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = fold.test_games.iter().map(String::as_str).collect();
    if train.len() != fold.train_games.len() || test.len() != fold.test_games.len() {
        return Err(Error::Leakage(format!("fold {} lists a game twice", fold.index)));
    }
    if let Some(g) = train.intersection(&test).next() {
        return Err(Error::Leakage(format!("fold {}: game {g} in both train and test", fold.index)));
    }
    let mut train_players = BTreeSet::new();
    for g in &train {
        let game = ds
            .game(g)
            .ok_or_else(|| Error::Leakage(format!("fold {}: unknown game {g}", fold.index)))?;
        train_players.extend(game.players.iter().map(|p| p.player_id.as_str()));
    }
    for g in &test {
        let game = ds
            .game(g)
            .ok_or_else(|| Error::Leakage(format!("fold {}: unknown game {g}", fold.index)))?;
        if let Some(p) = game.players.iter().find(|p| train_players.contains(p.player_id.as_str())) {
            return Err(Error::Leakage(format!(
                "fold {}: player {} in both train and test",
                fold.index, p.player_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("g{i:02}")).collect()
    }

    #[test]
    fn forty_four_games_ten_folds() {
        let plan = make_cv_plan(&ids(44), 10, 1).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4, 4, 4, 4, 4, 5, 5, 5, 5]);
    }

    #[test]
    fn one_game_per_fold() {
        let plan = make_cv_plan(&ids(10), 10, 1).unwrap();
        assert!(plan.fold_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn too_few_games() {
        assert!(matches!(make_cv_plan(&ids(5), 10, 1), Err(Error::TooFewGames { .. })));
    }

    #[test]
    fn folds_cover_every_game_once() {
        let plan = make_cv_plan(&ids(13), 4, 7).unwrap();
        let mut seen: Vec<String> = plan.folds().into_iter().flat_map(|f| f.test_games).collect();
        seen.sort();
        assert_eq!(seen, ids(13));
        for f in plan.folds() {
            assert_eq!(f.train_games.len() + f.test_games.len(), 13);
        }
        assert_eq!(plan, make_cv_plan(&ids(13), 4, 7).unwrap());
    }
}
