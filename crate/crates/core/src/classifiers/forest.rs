//! Random forest of Gini-split decision trees grown on bootstrap samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        spy_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_fraction(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { spy_fraction } => return spy_fraction,
            }
        }
    }

    pub fn votes_spy(&self, x: &[f64]) -> bool {
        self.leaf_fraction(x) > 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Fraction of trees voting spy.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.votes_spy(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub(crate) struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

pub(crate) fn fit_forest(x: &Matrix, labels: &[u8], params: &ForestParams) -> ForestModel {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = x.rows();
    let mtry = ((x.cols() as f64).sqrt().floor() as usize).max(1);
    // a column constant over all rows is constant in every node
    let varying: Vec<usize> = (0..x.cols())
        .filter(|&j| {
            let first = x.get(0, j);
            x.column(j).any(|v| v != first)
        })
        .collect();
    let trees = (0..params.trees)
        .map(|_| {
            let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            let sample: Vec<usize> = (0..n).map(|_| tree_rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                x,
                labels,
                mtry,
                max_depth: params.max_depth,
                rng: tree_rng,
                nodes: Vec::new(),
                features: varying.clone(),
                pairs: Vec::with_capacity(n),
            };
            builder.grow(sample, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();
    ForestModel { trees }
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    labels: &'a [u8],
    mtry: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
    pairs: Vec<(f64, u8)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let spies = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let node_id = self.nodes.len();
        let fraction = spies as f64 / idx.len() as f64;
        self.nodes.push(Node::Leaf { spy_fraction: fraction });
        let pure = spies == 0 || spies == idx.len();
        let depth_done = self.max_depth.is_some_and(|d| depth >= d);
        if pure || idx.len() < 2 || depth_done {
            return node_id;
        }
        let Some(best) = self.best_split(&idx, spies) else {
            return node_id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[node_id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        node_id
    }

    /// Draws features without replacement until `mtry` of them vary within
    /// the node, and returns the lowest weighted Gini split among them.
    fn best_split(&mut self, idx: &[usize], spies: usize) -> Option<BestSplit> {
        let n = idx.len() as f64;
        let total_pos = spies as f64;
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0;
        let p = self.features.len();
        for k in 0..p {
            if evaluated == self.mtry {
                break;
            }
            let pick = self.rng.gen_range(k..p);
            self.features.swap(k, pick);
            let f = self.features[k];
            self.pairs.clear();
            self.pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.labels[i])));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[self.pairs.len() - 1].0 {
                continue;
            }
            evaluated += 1;
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for w in 0..self.pairs.len() - 1 {
                left_n += 1.0;
                left_pos += f64::from(self.pairs[w].1);
                let (a, b) = (self.pairs[w].0, self.pairs[w + 1].0);
                if a == b {
                    continue;
                }
                let right_n = n - left_n;
                let right_pos = total_pos - left_pos;
                let gini = |cnt: f64, pos: f64| {
                    let q = pos / cnt;
                    2.0 * q * (1.0 - q)
                };
                let impurity = left_n * gini(left_n, left_pos) + right_n * gini(right_n, right_pos);
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}
