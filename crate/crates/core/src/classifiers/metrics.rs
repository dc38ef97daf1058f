//! Ranking and threshold metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive outscores a random negative, ties counting half.
/// Computed from mid-ranks in O(n log n).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassEval);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives, kept integral
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the mid-rank (i + 1 + j) / 2
        let positives = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        rank_sum2 += positives * (i as u64 + 1 + j as u64);
        i = j;
    }
    let (p, q) = (pos as u64, neg as u64);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub f1: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

impl MetricReport {
    /// Field-wise arithmetic mean.
    pub fn mean(reports: &[MetricReport]) -> MetricReport {
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        MetricReport {
            auc: avg(|r| r.auc),
            f1: avg(|r| r.f1),
            fnr: avg(|r| r.fnr),
            fpr: avg(|r| r.fpr),
            precision: avg(|r| r.precision),
            recall: avg(|r| r.recall),
            threshold: avg(|r| r.threshold),
        }
    }
}

/// Confusion-matrix metrics with predictions `score >= threshold`. Ratios
/// with a zero denominator are reported as 0.
pub fn classification_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricReport> {
    let auc = auc(scores, labels)?;
    let (mut tp, mut fp, mut fneg, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Ok(MetricReport {
        auc,
        f1,
        fnr: 1.0 - recall,
        fpr: ratio(fp, fp + tn),
        precision,
        recall,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.6, 0.7, 0.2], &[1, 1, 0, 0]).unwrap(), 0.75);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClassEval)));
    }

    #[test]
    fn perfect_scores() {
        let m = classification_metrics(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0], 0.5).unwrap();
        assert_eq!((m.f1, m.fnr, m.fpr), (1.0, 0.0, 0.0));
    }

    #[test]
    fn all_zero_scores() {
        let m = classification_metrics(&[0.0; 4], &[1, 0, 1, 0], 0.5).unwrap();
        assert_eq!((m.recall, m.fnr, m.f1), (0.0, 1.0, 0.0));
    }

    #[test]
    fn confusion_arithmetic() {
        // TP=2, FP=1, FN=3, TN=4
        let scores = [0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let labels = [1, 1, 0, 1, 1, 1, 0, 0, 0, 0];
        let m = classification_metrics(&scores, &labels, 0.5).unwrap();
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 0.4).abs() < 1e-15);
        assert!((m.f1 - 0.5).abs() < 1e-15);
        assert!((m.fnr - 0.6).abs() < 1e-15);
        assert!((m.fpr - 0.2).abs() < 1e-15);
    }
}
