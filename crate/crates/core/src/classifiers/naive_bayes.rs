use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    /// Indexed by class label (0 = resistance, 1 = spy).
    pub log_priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl GaussianNbModel {
    pub(crate) fn fit(x: &Matrix, labels: &[u8], var_floor: f64) -> Self {
        let p = x.cols();
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; p], vec![0.0; p]];
        for (row, &l) in x.iter_rows().zip(labels) {
            let c = l as usize;
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut variances = [vec![0.0; p], vec![0.0; p]];
        for (row, &l) in x.iter_rows().zip(labels) {
            let c = l as usize;
            for j in 0..p {
                variances[c][j] += (row[j] - means[c][j]).powi(2);
            }
        }
        for c in 0..2 {
            variances[c]
                .iter_mut()
                .for_each(|v| *v = (*v / counts[c] as f64).max(var_floor));
        }
        let n = labels.len() as f64;
        GaussianNbModel {
            log_priors: [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()],
            means,
            variances,
        }
    }

    fn joint_log_likelihood(&self, c: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&v, &m), &s2) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            acc += LN_2PI + s2.ln() + (v - m).powi(2) / s2;
        }
        self.log_priors[c] - 0.5 * acc
    }

    /// Posterior probability of the spy class.
    pub fn score(&self, x: &[f64]) -> f64 {
        let l0 = self.joint_log_likelihood(0, x);
        let l1 = self.joint_log_likelihood(1, x);
        super::linear::sigmoid(l1 - l0)
    }
}
