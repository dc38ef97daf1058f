use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Matrix,
    pub labels: Vec<u8>,
}

impl KnnModel {
    /// Fraction of spies among the k nearest training rows (Euclidean).
    /// Distance ties are broken by training row order.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k.min(d.len()).max(1);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let spies = d[..k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
        spies as f64 / k as f64
    }
}
