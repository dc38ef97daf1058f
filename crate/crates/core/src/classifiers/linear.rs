//! L2-regularized logistic regression and squared-hinge linear SVM.
//!
//! Both minimize `0.5 * |w|^2 + C * sum_i loss(y_i * (w.x_i + b))` with
//! `y_i` in {-1, +1}; the intercept is not penalized.

use serde::{Deserialize, Serialize};

use super::optim::{minimize, LbfgsOptions};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub gradient_norm: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loss {
    Logistic,
    SquaredHinge,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn fit_linear(x: &Matrix, labels: &[u8], c: f64, loss: Loss, gradient_tol: f64, max_iter: usize) -> LinearModel {
    let p = x.cols();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
        let (w, b) = theta.split_at(p);
        let b = b[0];
        let mut f = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        grad[..p].copy_from_slice(w);
        grad[p] = 0.0;
        for (i, row) in x.iter_rows().enumerate() {
            let z = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let m = y[i] * z;
            // d loss / d z
            let dz = match loss {
                Loss::Logistic => {
                    f += c * softplus(-m);
                    -c * y[i] * sigmoid(-m)
                }
                Loss::SquaredHinge => {
                    let h = 1.0 - m;
                    if h > 0.0 {
                        f += c * h * h;
                        -2.0 * c * y[i] * h
                    } else {
                        0.0
                    }
                }
            };
            if dz != 0.0 {
                for (g, a) in grad[..p].iter_mut().zip(row) {
                    *g += dz * a;
                }
                grad[p] += dz;
            }
        }
        f
    };
    let res = minimize(
        objective,
        vec![0.0; p + 1],
        &LbfgsOptions {
            memory: 10,
            max_iter,
            gradient_tol,
        },
    );
    let mut theta = res.x;
    let bias = theta.pop().unwrap_or(0.0);
    LinearModel {
        weights: theta,
        bias,
        gradient_norm: res.gradient_norm,
    }
}
