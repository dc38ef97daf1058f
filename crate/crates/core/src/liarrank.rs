//! Cross-game rank meta-features.
//!
//! For a scalar feature and a training game, a player's rank is the
//! position their value would take if they had played in that game: the
//! game's values plus the query value, sorted in descending order. A player
//! gets one rank per training game and per selected feature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Game;
use crate::error::{Error, Result};

/// Game id and member player ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRoster {
    pub game_id: String,
    pub player_ids: Vec<String>,
}

impl From<&Game> for GameRoster {
    fn from(g: &Game) -> Self {
        GameRoster {
            game_id: g.game_id.clone(),
            player_ids: g.players.iter().map(|p| p.player_id.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CorpusGame {
    game_id: String,
    /// Per selected dimension, the members' values sorted descending.
    sorted_desc: Vec<Vec<f64>>,
    /// Member player id to its value per selected dimension.
    members: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiarRankCorpus {
    /// Indices into the player feature vectors.
    pub dims: Vec<usize>,
    games: Vec<CorpusGame>,
}

impl LiarRankCorpus {
    pub fn game_ids(&self) -> impl Iterator<Item = &str> {
        self.games.iter().map(|g| g.game_id.as_str())
    }

    pub fn game_count(&self) -> usize {
        self.games.len()
    }

    /// Number of members of the game at position `j`.
    pub fn game_size(&self, j: usize) -> usize {
        self.games[j].members.len()
    }

    /// Stored values of `dim_pos` for the game at position `j`, descending.
    pub fn values(&self, j: usize, dim_pos: usize) -> &[f64] {
        &self.games[j].sorted_desc[dim_pos]
    }

    fn game_index(&self, game_id: &str) -> Result<usize> {
        self.games
            .iter()
            .position(|g| g.game_id == game_id)
            .ok_or_else(|| Error::UnknownGame(game_id.to_string()))
    }
}

pub fn build_corpus(
    training_games: &[GameRoster],
    player_features: &BTreeMap<String, Vec<f64>>,
    dims: &[usize],
) -> Result<LiarRankCorpus> {
    let mut games = Vec::with_capacity(training_games.len());
    for g in training_games {
        let mut members = BTreeMap::new();
        let mut cols = vec![Vec::with_capacity(g.player_ids.len()); dims.len()];
        for pid in &g.player_ids {
            let fv = player_features.get(pid).ok_or_else(|| Error::MissingFeature {
                player: pid.clone(),
                dim: dims.first().copied().unwrap_or(0),
            })?;
            let mut vals = Vec::with_capacity(dims.len());
            for (pos, &d) in dims.iter().enumerate() {
                let v = *fv.get(d).ok_or_else(|| Error::MissingFeature {
                    player: pid.clone(),
                    dim: d,
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteInput { row: 0, col: d });
                }
                cols[pos].push(v);
                vals.push(v);
            }
            members.insert(pid.clone(), vals);
        }
        for c in &mut cols {
            c.sort_by(|a, b| b.total_cmp(a));
        }
        games.push(CorpusGame {
            game_id: g.game_id.clone(),
            sorted_desc: cols,
            members,
        });
    }
    Ok(LiarRankCorpus {
        dims: dims.to_vec(),
        games,
    })
}

fn rank_in(game: &CorpusGame, dim_pos: usize, value: f64, exclude: Option<&str>) -> u32 {
    let sorted = &game.sorted_desc[dim_pos];
    let mut greater = sorted.partition_point(|&v| v > value);
    if let Some(own) = exclude.and_then(|p| game.members.get(p)) {
        if own[dim_pos] > value {
            greater -= 1;
        }
    }
    greater as u32 + 1
}

/// Rank of `value` among game `game_id`'s values of the selected dimension
/// at position `dim_pos`: one plus the number of strictly greater values,
/// so a query tied with stored values ranks ahead of them.
pub fn liarrank_scalar(corpus: &LiarRankCorpus, game_id: &str, dim_pos: usize, value: f64) -> Result<u32> {
    let j = corpus.game_index(game_id)?;
    Ok(rank_in(&corpus.games[j], dim_pos, value, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiarRankVector {
    pub player_id: String,
    /// Dimension-major: for each selected dimension, one rank per training
    /// game in corpus order.
    pub ranks: Vec<u32>,
    /// Size of the ranked set behind each entry.
    pub set_sizes: Vec<u32>,
}

impl LiarRankVector {
    /// Raw ranks, or ranks divided by the size of the ranked set.
    pub fn to_features(&self, normalize: bool) -> Vec<f64> {
        if normalize {
            self.ranks
                .iter()
                .zip(&self.set_sizes)
                .map(|(&r, &n)| r as f64 / n as f64)
                .collect()
        } else {
            self.ranks.iter().map(|&r| r as f64).collect()
        }
    }
}

/// Rank vector of one player. A player who is a member of a training game
/// is ranked against the other members only, so it appears once in that
/// game's ranked set.
pub fn liarrank_vector(corpus: &LiarRankCorpus, player_id: &str, features: &[f64]) -> Result<LiarRankVector> {
    let n = corpus.games.len();
    let mut ranks = Vec::with_capacity(corpus.dims.len() * n);
    let mut set_sizes = Vec::with_capacity(corpus.dims.len() * n);
    for (pos, &d) in corpus.dims.iter().enumerate() {
        let value = *features.get(d).ok_or_else(|| Error::MissingFeature {
            player: player_id.to_string(),
            dim: d,
        })?;
        for game in &corpus.games {
            let member = game.members.contains_key(player_id);
            ranks.push(rank_in(game, pos, value, Some(player_id)));
            set_sizes.push(game.members.len() as u32 + u32::from(!member));
        }
    }
    Ok(LiarRankVector {
        player_id: player_id.to_string(),
        ranks,
        set_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(values: &[(&str, &[(&str, f64)])]) -> LiarRankCorpus {
        let mut feats = BTreeMap::new();
        let mut rosters = Vec::new();
        for (g, players) in values {
            rosters.push(GameRoster {
                game_id: g.to_string(),
                player_ids: players.iter().map(|(p, _)| p.to_string()).collect(),
            });
            for (p, v) in *players {
                feats.insert(p.to_string(), vec![*v]);
            }
        }
        build_corpus(&rosters, &feats, &[0]).unwrap()
    }

    #[test]
    fn scalar_ranks() {
        let c = corpus(&[("g", &[("a", 0.5), ("b", 0.2)])]);
        assert_eq!(liarrank_scalar(&c, "g", 0, 0.3).unwrap(), 2);
        assert_eq!(liarrank_scalar(&c, "g", 0, 0.9).unwrap(), 1);
        assert_eq!(liarrank_scalar(&c, "g", 0, 0.2).unwrap(), 2);
        assert!(matches!(liarrank_scalar(&c, "x", 0, 0.2), Err(Error::UnknownGame(_))));
    }

    #[test]
    fn corpus_shape() {
        let c = corpus(&[
            ("g1", &[("a", 1.0), ("b", 2.0), ("c", 3.0)]),
            ("g2", &[("d", 1.0), ("e", 2.0), ("f", 3.0)]),
        ]);
        assert_eq!(c.game_count(), 2);
        assert_eq!(c.values(0, 0), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn missing_feature() {
        let rosters = vec![GameRoster {
            game_id: "g".into(),
            player_ids: vec!["a".into()],
        }];
        let feats = BTreeMap::from([("a".to_string(), vec![0.0; 3])]);
        assert!(matches!(
            build_corpus(&rosters, &feats, &[5]),
            Err(Error::MissingFeature { dim: 5, .. })
        ));
    }

    #[test]
    fn self_exclusion_keeps_member_once() {
        let c = corpus(&[("g", &[("a", 0.9), ("b", 0.5), ("c", 0.1)])]);
        // member "a" queried with a lower value than it holds in the corpus
        let v = liarrank_vector(&c, "a", &[0.3]).unwrap();
        assert_eq!(v.ranks, vec![2]);
        assert_eq!(v.set_sizes, vec![3]);
        let outsider = liarrank_vector(&c, "z", &[0.3]).unwrap();
        assert_eq!(outsider.ranks, vec![3]);
        assert_eq!(outsider.set_sizes, vec![4]);
        assert_eq!(outsider.to_features(true), vec![0.75]);
    }

    #[test]
    fn global_maximum_ranks_first() {
        let c = corpus(&[("g1", &[("a", 1.0), ("b", 2.0)]), ("g2", &[("c", 5.0), ("d", -1.0)])]);
        assert_eq!(liarrank_vector(&c, "q", &[9.0]).unwrap().ranks, vec![1, 1]);
    }
}
