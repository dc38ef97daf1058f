//! Diagonal-covariance Gaussian mixture fitted by EM from a k-means++ start.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Convergence threshold on the change of mean per-point log-likelihood.
    pub tol: f64,
    pub variance_floor: f64,
    /// Rows beyond this count are subsampled (seeded) before fitting.
    pub max_points: Option<usize>,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 32,
            max_iters: 100,
            tol: 1e-6,
            variance_floor: 1e-6,
            max_points: Some(4000),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub variance_floor: f64,
    /// Mean per-point log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
    pub fitted_on: Vec<String>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Per-component constants for repeated posterior evaluation.
    pub fn precompute(&self) -> GmmTerms {
        GmmTerms {
            log_norm: self
                .weights
                .iter()
                .zip(&self.variances)
                .map(|(&w, v)| {
                    if w > 0.0 {
                        w.ln() - 0.5 * v.iter().map(|x| LN_2PI + x.ln()).sum::<f64>()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
            inv_var: self
                .variances
                .iter()
                .map(|v| v.iter().map(|x| 1.0 / x).collect())
                .collect(),
        }
    }

    /// Writes component posteriors for `x` into `out` and returns log p(x).
    pub fn posteriors(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.posteriors_with(&self.precompute(), x, out)
    }

    /// [`GmmModel::posteriors`] with constants from [`GmmModel::precompute`].
    pub fn posteriors_with(&self, terms: &GmmTerms, x: &[f64], out: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (k, o) in out.iter_mut().enumerate() {
            *o = if terms.log_norm[k] > f64::NEG_INFINITY {
                let mut acc = 0.0;
                for ((&xi, &m), &iv) in x.iter().zip(&self.means[k]).zip(&terms.inv_var[k]) {
                    let d = xi - m;
                    acc += d * d * iv;
                }
                terms.log_norm[k] - 0.5 * acc
            } else {
                f64::NEG_INFINITY
            };
            max = max.max(*o);
        }
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            sum += *o;
        }
        out.iter_mut().for_each(|o| *o /= sum);
        max + sum.ln()
    }

    pub fn mean_log_likelihood(&self, data: &Matrix) -> f64 {
        let terms = self.precompute();
        let mut buf = vec![0.0; self.components()];
        let total: f64 = data.iter_rows().map(|x| self.posteriors_with(&terms, x, &mut buf)).sum();
        total / data.rows() as f64
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Matrix {
        let pick = WeightedIndex::new(&self.weights).expect("valid mixture weights");
        let d = self.dim();
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            let k = pick.sample(rng);
            let row = out.row_mut(i);
            for j in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                row[j] = self.means[k][j] + z * self.variances[k][j].sqrt();
            }
        }
        out
    }
}

/// Log normalizers and inverse variances of each component.
#[derive(Debug, Clone)]
pub struct GmmTerms {
    log_norm: Vec<f64>,
    inv_var: Vec<Vec<f64>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut centers = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.iter_rows().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        let c = data.row(next).to_vec();
        for (i, x) in data.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// Fits a diagonal GMM. The log-likelihood trace is non-decreasing; the
/// variance floor is applied inside every M-step.
pub fn fit_gmm(data: &Matrix, cfg: &GmmConfig) -> Result<GmmModel> {
    let k = cfg.components;
    if k == 0 || data.rows() < k {
        return Err(Error::TooFewPoints {
            points: data.rows(),
            components: k,
        });
    }
    if let Some((row, col)) = data.first_non_finite() {
        return Err(Error::NonFiniteInput { row, col });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let subset;
    let data = match cfg.max_points {
        Some(m) if data.rows() > m && m >= k => {
            let mut idx = sample(&mut rng, data.rows(), m).into_vec();
            idx.sort_unstable();
            subset = data.select_rows(&idx);
            &subset
        }
        _ => data,
    };
    let n = data.rows();
    let d = data.cols();
    let floor = cfg.variance_floor;

    let mean: Vec<f64> = (0..d).map(|j| data.column(j).sum::<f64>() / n as f64).collect();
    let var: Vec<f64> = (0..d)
        .map(|j| {
            let v = data.column(j).map(|x| (x - mean[j]).powi(2)).sum::<f64>() / n as f64;
            v.max(floor)
        })
        .collect();
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_pp(data, k, &mut rng),
        variances: vec![var; k],
        variance_floor: floor,
        log_likelihood_trace: Vec::new(),
        fitted_on: Vec::new(),
    };

    let mut resp = Matrix::zeros(n, k);
    for iter in 0..=cfg.max_iters {
        // E-step
        let mut total = 0.0;
        let terms = model.precompute();
        for i in 0..n {
            let x = data.row(i);
            total += model.posteriors_with(&terms, x, resp.row_mut(i));
        }
        let ll = total / n as f64;
        model.log_likelihood_trace.push(ll);
        if iter == cfg.max_iters {
            break;
        }
        if let [.., prev, last] = model.log_likelihood_trace[..] {
            if (last - prev).abs() < cfg.tol {
                break;
            }
        }
        // M-step
        let mut nk = vec![0.0; k];
        let mut sums = vec![vec![0.0; d]; k];
        for i in 0..n {
            let x = data.row(i);
            for (c, &r) in resp.row(i).iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                nk[c] += r;
                for (s, &xi) in sums[c].iter_mut().zip(x) {
                    *s += r * xi;
                }
            }
        }
        let alive: Vec<bool> = nk.iter().map(|&v| v > 1e-10 * n as f64).collect();
        for c in 0..k {
            if alive[c] {
                for j in 0..d {
                    model.means[c][j] = sums[c][j] / nk[c];
                }
            }
        }
        let mut sq = vec![vec![0.0; d]; k];
        for i in 0..n {
            let x = data.row(i);
            for (c, &r) in resp.row(i).iter().enumerate() {
                if r == 0.0 || !alive[c] {
                    continue;
                }
                for j in 0..d {
                    let dv = x[j] - model.means[c][j];
                    sq[c][j] += r * dv * dv;
                }
            }
        }
        for c in 0..k {
            model.weights[c] = nk[c] / n as f64;
            if alive[c] {
                for j in 0..d {
                    model.variances[c][j] = (sq[c][j] / nk[c]).max(floor);
                }
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_is_closed_form() {
        let data = Matrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0], vec![5.0, 0.0]]).unwrap();
        let cfg = GmmConfig {
            components: 1,
            ..GmmConfig::default()
        };
        let g = fit_gmm(&data, &cfg).unwrap();
        assert_eq!(g.weights, vec![1.0]);
        assert!((g.means[0][0] - 3.0).abs() < 1e-12);
        assert!((g.variances[0][0] - 8.0 / 3.0).abs() < 1e-12);
        // constant column is floored
        assert_eq!(g.variances[0][1], 1e-6);
    }

    #[test]
    fn too_few_points() {
        let data = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let cfg = GmmConfig {
            components: 3,
            ..GmmConfig::default()
        };
        assert!(matches!(fit_gmm(&data, &cfg), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn two_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        for i in 0..600 {
            let c = if i < 400 { 0.0 } else { 10.0 };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![c + 0.5 * a, c + 0.5 * b]);
        }
        let data = Matrix::from_rows(&rows).unwrap();
        let g = fit_gmm(
            &data,
            &GmmConfig {
                components: 2,
                seed: 3,
                ..GmmConfig::default()
            },
        )
        .unwrap();
        let (lo, hi) = if g.means[0][0] < g.means[1][0] { (0, 1) } else { (1, 0) };
        for j in 0..2 {
            assert!(g.means[lo][j].abs() < 0.1);
            assert!((g.means[hi][j] - 10.0).abs() < 0.1);
        }
        assert!((g.weights[lo] - 400.0 / 600.0).abs() < 0.05);
        assert!((g.weights[hi] - 200.0 / 600.0).abs() < 0.05);
        for w in g.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let cfg = GmmConfig {
            components: 4,
            seed: 9,
            ..GmmConfig::default()
        };
        assert_eq!(fit_gmm(&data, &cfg).unwrap(), fit_gmm(&data, &cfg).unwrap());
    }
}
