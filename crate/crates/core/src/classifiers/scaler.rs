use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Per-dimension z-scoring fitted on training rows. Constant dimensions
/// are centred and left unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mean: Vec<f64> = (0..x.cols()).map(|j| x.column(j).sum::<f64>() / n).collect();
        let std = (0..x.cols())
            .map(|j| {
                let v = x.column(j).map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
                let s = v.sqrt();
                if s > 1e-12 * (1.0 + mean[j].abs()) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, std }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}
