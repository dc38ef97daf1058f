//! Fisher Vector encoding of a set of clip vectors under a fitted GMM.

use crate::encoders::gmm::GmmModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Gradient of the average log-likelihood with respect to the component
/// means and (diagonal) standard deviations, scaled by the inverse square
/// root of the Fisher information. Layout: all K mean blocks followed by all
/// K variance blocks, each of length D.
///
/// With `normalize`, a signed square root and then L2 normalization are
/// applied.
pub fn encode_fisher_vector(clips: &Matrix, gmm: &GmmModel, normalize: bool) -> Result<Vec<f64>> {
    let k = gmm.components();
    let d = gmm.dim();
    if clips.rows() == 0 {
        return Err(Error::EmptyInput("no clips to encode".into()));
    }
    if clips.cols() != d {
        return Err(Error::DimMismatch {
            expected: d,
            actual: clips.cols(),
        });
    }
    let mut fv = vec![0.0; 2 * k * d];
    let (mean_block, var_block) = fv.split_at_mut(k * d);
    let mut post = vec![0.0; k];
    let sd: Vec<Vec<f64>> = gmm
        .variances
        .iter()
        .map(|v| v.iter().map(|x| x.sqrt()).collect())
        .collect();
    let terms = gmm.precompute();
    for x in clips.iter_rows() {
        gmm.posteriors_with(&terms, x, &mut post);
        for c in 0..k {
            let g = post[c];
            if g == 0.0 {
                continue;
            }
            for j in 0..d {
                let z = (x[j] - gmm.means[c][j]) / sd[c][j];
                mean_block[c * d + j] += g * z;
                var_block[c * d + j] += g * (z * z - 1.0);
            }
        }
    }
    let t = clips.rows() as f64;
    for c in 0..k {
        let w = gmm.weights[c];
        let (sm, sv) = if w > 0.0 {
            (1.0 / (t * w.sqrt()), 1.0 / (t * (2.0 * w).sqrt()))
        } else {
            (0.0, 0.0)
        };
        for j in 0..d {
            mean_block[c * d + j] *= sm;
            var_block[c * d + j] *= sv;
        }
    }
    if normalize {
        power_l2_normalize(&mut fv);
    }
    Ok(fv)
}

/// Signed square root followed by L2 normalization. A zero vector is left
/// unchanged.
pub fn power_l2_normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_gmm(d: usize) -> GmmModel {
        GmmModel {
            weights: vec![1.0],
            means: vec![vec![0.5; d]],
            variances: vec![vec![2.0; d]],
            variance_floor: 1e-6,
            log_likelihood_trace: vec![],
            fitted_on: vec![],
        }
    }

    #[test]
    fn clip_at_mean() {
        let g = unit_gmm(3);
        let clips = Matrix::from_rows(&[vec![0.5; 3]]).unwrap();
        let fv = encode_fisher_vector(&clips, &g, false).unwrap();
        assert_eq!(fv.len(), 6);
        for j in 0..3 {
            assert_eq!(fv[j], 0.0);
            assert!((fv[3 + j] + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_has_unit_norm() {
        let g = unit_gmm(2);
        let clips = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.0, 3.0]]).unwrap();
        let fv = encode_fisher_vector(&clips, &g, true).unwrap();
        let n: f64 = fv.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let g = unit_gmm(2);
        assert!(matches!(
            encode_fisher_vector(&Matrix::zeros(0, 2), &g, false),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            encode_fisher_vector(&Matrix::zeros(1, 3), &g, false),
            Err(Error::DimMismatch { .. })
        ));
    }
}
