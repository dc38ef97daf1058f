//! Feature selection and late fusion of per-family classifier scores.

use serde::{Deserialize, Serialize};

use crate::classifiers::{auc, ClassifierKind, MetricReport, ScoreSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Exhaustive subset search is limited to this many candidates.
pub const MAX_CANDIDATES: usize = 20;

/// One evaluated (subset, classifier) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEvaluation<T> {
    /// Indices into the candidate list, ascending.
    pub subset: Vec<usize>,
    pub kind: ClassifierKind,
    pub cv_auc: f64,
    pub payload: T,
}

/// Selection order: higher AUC, then fewer members, then the
/// lexicographically smaller subset, then classifier order.
pub fn selection_order<T>(a: &SubsetEvaluation<T>, b: &SubsetEvaluation<T>) -> std::cmp::Ordering {
    b.cv_auc
        .total_cmp(&a.cv_auc)
        .then(a.subset.len().cmp(&b.subset.len()))
        .then_with(|| a.subset.cmp(&b.subset))
        .then(a.kind.cmp(&b.kind))
}

#[derive(Debug, Clone)]
pub struct SubsetSearch<T> {
    pub candidates: Vec<String>,
    pub evaluations: Vec<SubsetEvaluation<T>>,
}

impl<T> SubsetSearch<T> {
    pub fn best(&self) -> Option<&SubsetEvaluation<T>> {
        self.evaluations.iter().min_by(|a, b| selection_order(a, b))
    }

    pub fn best_for_kind(&self, kind: ClassifierKind) -> Option<&SubsetEvaluation<T>> {
        self.evaluations
            .iter()
            .filter(|e| e.kind == kind)
            .min_by(|a, b| selection_order(a, b))
    }

    pub fn subset_names(&self, subset: &[usize]) -> Vec<String> {
        subset.iter().map(|&i| self.candidates[i].clone()).collect()
    }
}

/// All non-empty subsets of `0..n`, ordered by size then lexicographically.
pub fn enumerate_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1u32 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

/// Evaluates every non-empty candidate subset with every classifier kind
/// through `evaluate`, which returns a cross-validated AUC for the pair.
pub fn select_channel_subset<T, F>(
    candidates: &[String],
    kinds: &[ClassifierKind],
    mut evaluate: F,
) -> Result<SubsetSearch<T>>
where
    F: FnMut(&[usize], ClassifierKind) -> Result<(f64, T)>,
{
    if candidates.len() > MAX_CANDIDATES {
        return Err(Error::TooManyChannels(candidates.len()));
    }
    let mut evaluations = Vec::new();
    for subset in enumerate_subsets(candidates.len()) {
        for &kind in kinds {
            let (cv_auc, payload) = evaluate(&subset, kind)?;
            evaluations.push(SubsetEvaluation {
                subset: subset.clone(),
                kind,
                cv_auc,
                payload,
            });
        }
    }
    Ok(SubsetSearch {
        candidates: candidates.to_vec(),
        evaluations,
    })
}

/// Per-column AUC folded around 0.5, i.e. `max(auc, 1 - auc)`.
pub fn folded_auc(x: &Matrix, labels: &[u8]) -> Result<Vec<f64>> {
    (0..x.cols())
        .map(|j| {
            let col: Vec<f64> = x.column(j).collect();
            auc(&col, labels).map(|a| a.max(1.0 - a))
        })
        .collect()
}

/// Univariate filter: keeps the `max_dims` columns with the highest folded
/// AUC on the given rows (ties by column index). Returned ascending.
pub fn select_dims(x: &Matrix, labels: &[u8], max_dims: usize) -> Result<Vec<usize>> {
    if max_dims >= x.cols() {
        return Ok((0..x.cols()).collect());
    }
    let scores = folded_auc(x, labels)?;
    let mut order: Vec<usize> = (0..x.cols()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..max_dims].to_vec();
    keep.sort_unstable();
    Ok(keep)
}

/// Convex fusion weights, one per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: Vec<f64>,
}

impl FusionWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::BadWeights("no weights".into()));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::BadWeights(format!("negative or non-finite weight in {alpha:?}")));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(FusionWeights { alpha })
    }

    pub fn one_hot(len: usize, at: usize) -> Self {
        let mut alpha = vec![0.0; len];
        alpha[at] = 1.0;
        FusionWeights { alpha }
    }

    fn from_grid(units: &[u32], total: u32) -> Self {
        FusionWeights {
            alpha: units.iter().map(|&u| f64::from(u) / f64::from(total)).collect(),
        }
    }
}

fn check_aligned(sets: &[&ScoreSet]) -> Result<()> {
    let first = sets.first().ok_or(Error::MisalignedPlayers)?;
    for s in &sets[1..] {
        if s.player_ids != first.player_ids || s.labels != first.labels {
            return Err(Error::MisalignedPlayers);
        }
    }
    Ok(())
}

/// Per-player weighted sum of the family scores.
pub fn fuse(sets: &[&ScoreSet], weights: &FusionWeights) -> Result<ScoreSet> {
    if sets.len() != weights.alpha.len() {
        return Err(Error::BadWeights(format!(
            "{} weights for {} score sets",
            weights.alpha.len(),
            sets.len()
        )));
    }
    FusionWeights::new(weights.alpha.clone())?;
    check_aligned(sets)?;
    let first = sets[0];
    let scores = fused_scores(sets, &weights.alpha);
    ScoreSet::new(first.player_ids.clone(), scores, first.labels.clone())
}

fn fused_scores(sets: &[&ScoreSet], alpha: &[f64]) -> Vec<f64> {
    let n = sets[0].len();
    let mut out = vec![0.0; n];
    for (s, &a) in sets.iter().zip(alpha) {
        if a == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(&s.scores) {
            *o += a * v;
        }
    }
    out
}

/// Number of grid units that sum to one for `step`, if `step` divides 1.
pub fn grid_units(step: f64) -> Result<u32> {
    let units = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || ((1.0 / step) - units).abs() > 1e-9 {
        return Err(Error::BadWeights(format!("grid step {step} does not divide 1")));
    }
    Ok(units as u32)
}

/// All compositions of `total` into `parts` non-negative parts, in
/// lexicographic order.
pub fn weight_grid(parts: usize, total: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, parts: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == parts {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=remaining {
            prefix.push(v);
            rec(prefix, parts, remaining - v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(&mut Vec::with_capacity(parts), parts, total, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub weights: FusionWeights,
    pub auc: f64,
    pub candidates: usize,
}

/// Exhaustive search over weight tuples on the `step` grid, maximizing the
/// AUC of the fused scores. Families flagged in `excluded` are held at
/// weight 0. Ties go to the tuple with the fewest non-zero weights, then to
/// the lexicographically smallest one.
pub fn grid_search_weights(sets: &[&ScoreSet], step: f64, excluded: &[bool]) -> Result<GridSearchResult> {
    check_aligned(sets)?;
    let total = grid_units(step)?;
    let parts = sets.len();
    if excluded.iter().filter(|&&e| !e).count() == 0 && !excluded.is_empty() {
        return Err(Error::BadWeights("every family excluded".into()));
    }
    let labels = &sets[0].labels;
    let mut best: Option<(Vec<u32>, f64, usize)> = None;
    let mut candidates = 0;
    let mut alpha = vec![0.0; parts];
    for units in weight_grid(parts, total) {
        if units
            .iter()
            .zip(excluded.iter().chain(std::iter::repeat(&false)))
            .any(|(&u, &ex)| ex && u > 0)
        {
            continue;
        }
        candidates += 1;
        for (a, &u) in alpha.iter_mut().zip(&units) {
            *a = f64::from(u) / f64::from(total);
        }
        let a = auc(&fused_scores(sets, &alpha), labels)?;
        let nonzero = units.iter().filter(|&&u| u > 0).count();
        if best
            .as_ref()
            .is_none_or(|(_, b, nz)| a > *b || (a == *b && nonzero < *nz))
        {
            best = Some((units, a, nonzero));
        }
    }
    let (units, auc, _) = best.ok_or_else(|| Error::BadWeights("empty weight grid".into()))?;
    Ok(GridSearchResult {
        weights: FusionWeights::from_grid(&units, total),
        auc,
        candidates,
    })
}

/// Every assignment of one classifier kind per family.
pub fn enumerate_assignments(families: usize, kinds: &[ClassifierKind]) -> Vec<Vec<ClassifierKind>> {
    let mut out = vec![Vec::new()];
    for _ in 0..families {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                kinds.iter().map(move |&k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

/// Validation (out-of-fold) and test scores of each classifier kind for one
/// family within one fold.
#[derive(Debug, Clone)]
pub struct FamilyScores {
    pub family: String,
    pub validation: Vec<(ClassifierKind, ScoreSet)>,
    pub test: Vec<(ClassifierKind, ScoreSet)>,
}

impl FamilyScores {
    fn get(list: &[(ClassifierKind, ScoreSet)], kind: ClassifierKind) -> Option<&ScoreSet> {
        list.iter().find(|(k, _)| *k == kind).map(|(_, s)| s)
    }

    pub fn validation_for(&self, kind: ClassifierKind) -> Option<&ScoreSet> {
        Self::get(&self.validation, kind)
    }

    pub fn test_for(&self, kind: ClassifierKind) -> Option<&ScoreSet> {
        Self::get(&self.test, kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentOutcome {
    pub kinds: Vec<ClassifierKind>,
    pub weights: Option<FusionWeights>,
    pub test: Option<MetricReport>,
    pub error: Option<String>,
}

/// For each classifier assignment, searches fusion weights on validation
/// scores and evaluates the fused test scores. A failing assignment is
/// recorded with its error.
pub fn evaluate_assignments(
    families: &[FamilyScores],
    kinds: &[ClassifierKind],
    step: f64,
    threshold: f64,
) -> Vec<AssignmentOutcome> {
    enumerate_assignments(families.len(), kinds)
        .into_iter()
        .map(|assignment| {
            let run = || -> Result<(FusionWeights, MetricReport)> {
                let mut val = Vec::with_capacity(families.len());
                let mut test = Vec::with_capacity(families.len());
                for (f, &k) in families.iter().zip(&assignment) {
                    val.push(f.validation_for(k).ok_or_else(|| {
                        Error::InvalidConfig(format!("no {k} scores for family {}", f.family))
                    })?);
                    test.push(f.test_for(k).ok_or_else(|| {
                        Error::InvalidConfig(format!("no {k} scores for family {}", f.family))
                    })?);
                }
                let w = grid_search_weights(&val, step, &[])?.weights;
                let fused = fuse(&test, &w)?;
                Ok((w, fused.metrics(threshold)?))
            };
            match run() {
                Ok((w, m)) => AssignmentOutcome {
                    kinds: assignment,
                    weights: Some(w),
                    test: Some(m),
                    error: None,
                },
                Err(e) => AssignmentOutcome {
                    kinds: assignment,
                    weights: None,
                    test: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64]) -> ScoreSet {
        let n = scores.len();
        ScoreSet::new(
            (0..n).map(|i| format!("p{i}")).collect(),
            scores.to_vec(),
            (0..n).map(|i| (i % 2) as u8).collect(),
        )
        .unwrap()
    }

    #[test]
    fn subset_enumeration_counts() {
        assert_eq!(enumerate_subsets(3).len(), 7);
        assert_eq!(enumerate_subsets(3)[0], vec![0]);
        assert_eq!(enumerate_subsets(3)[6], vec![0, 1, 2]);
        let cands: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let kinds = [ClassifierKind::LogisticRegression, ClassifierKind::Knn];
        let s = select_channel_subset(&cands, &kinds, |_, _| Ok((0.5, ()))).unwrap();
        for k in kinds {
            assert_eq!(s.evaluations.iter().filter(|e| e.kind == k).count(), 7);
        }
        // all tied: smallest, lexicographically first subset, first kind in order
        let best = s.best().unwrap();
        assert_eq!((best.subset.clone(), best.kind), (vec![0], ClassifierKind::Knn));
    }

    #[test]
    fn too_many_channels() {
        let cands: Vec<String> = (0..21).map(|i| i.to_string()).collect();
        let r = select_channel_subset(&cands, &[ClassifierKind::Knn], |_, _| Ok((0.5, ())));
        assert!(matches!(r, Err(Error::TooManyChannels(21))));
    }

    #[test]
    fn select_dims_identity_and_constant() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0], vec![4.0, 5.0]]).unwrap();
        let y = [0, 0, 1, 1];
        assert_eq!(select_dims(&x, &y, 5).unwrap(), vec![0, 1]);
        assert_eq!(folded_auc(&x, &y).unwrap()[1], 0.5);
        assert_eq!(select_dims(&x, &y, 1).unwrap(), vec![0]);
    }

    #[test]
    fn fuse_examples() {
        let a = set(&[0.2, 0.4]);
        let b = set(&[0.8, 0.1]);
        let w = FusionWeights::new(vec![0.5, 0.5]).unwrap();
        let f = fuse(&[&a, &b], &w).unwrap();
        assert_eq!(f.scores[0], 0.5);
        let one = fuse(&[&a, &b], &FusionWeights::one_hot(2, 0)).unwrap();
        assert_eq!(one, a);
        let same = fuse(&[&a, &a], &FusionWeights::new(vec![0.3, 0.7]).unwrap()).unwrap();
        for (x, y) in same.scores.iter().zip(&a.scores) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn fuse_errors() {
        let a = set(&[0.2, 0.4]);
        let mut b = set(&[0.8, 0.1]);
        b.player_ids[1] = "zz".into();
        let w = FusionWeights::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(fuse(&[&a, &b], &w), Err(Error::MisalignedPlayers)));
        assert!(FusionWeights::new(vec![0.5, 0.6]).is_err());
        assert!(FusionWeights::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn grid_counts() {
        assert_eq!(weight_grid(5, grid_units(0.1).unwrap()).len(), 1001);
        assert_eq!(weight_grid(5, grid_units(0.5).unwrap()).len(), 15);
        assert_eq!(weight_grid(5, grid_units(0.25).unwrap()).len(), 70);
        assert!(grid_units(0.3).is_err());
    }

    #[test]
    fn grid_search_prefers_informative_family() {
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i < 20)).collect();
        let ids: Vec<String> = (0..40).map(|i| format!("p{i}")).collect();
        let perfect = ScoreSet::new(ids.clone(), labels.iter().map(|&l| 0.1 + 0.8 * f64::from(l)).collect(), labels.clone()).unwrap();
        let noise: Vec<ScoreSet> = (0..4)
            .map(|k| {
                let s = (0..40).map(|i| ((i * 37 + k * 11) % 17) as f64 / 17.0).collect();
                ScoreSet::new(ids.clone(), s, labels.clone()).unwrap()
            })
            .collect();
        let sets: Vec<&ScoreSet> = std::iter::once(&perfect).chain(noise.iter()).collect();
        let r = grid_search_weights(&sets, 0.1, &[]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.candidates, 1001);
        assert_eq!(r.weights.alpha, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let sum: f64 = r.weights.alpha.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn excluded_family_stays_zero() {
        let a = set(&[0.9, 0.1, 0.8, 0.2]);
        let b = set(&[0.1, 0.9, 0.3, 0.2]);
        let r = grid_search_weights(&[&a, &b], 0.1, &[true, false]).unwrap();
        assert_eq!(r.weights.alpha, vec![0.0, 1.0]);
        assert_eq!(r.candidates, 1);
    }

    #[test]
    fn assignment_count() {
        assert_eq!(enumerate_assignments(5, &ClassifierKind::ALL).len(), 3125);
    }
}
