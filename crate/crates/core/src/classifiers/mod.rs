//! The five-classifier suite. Every model z-scores its inputs with a scaler
//! fitted on the training rows and emits spy scores in [0, 1].

mod forest;
mod knn;
mod linear;
pub mod metrics;
mod naive_bayes;
mod optim;
mod scaler;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::{ForestModel, Node, Tree};
pub use knn::KnnModel;
pub use linear::{sigmoid, LinearModel};
pub use metrics::{auc, classification_metrics, MetricReport};
pub use naive_bayes::GaussianNbModel;
pub use scaler::Scaler;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "LR")]
    LogisticRegression,
    #[serde(rename = "NB")]
    GaussianNb,
    #[serde(rename = "L-SVM")]
    LinearSvm,
    #[serde(rename = "RF")]
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Knn,
        ClassifierKind::LogisticRegression,
        ClassifierKind::GaussianNb,
        ClassifierKind::LinearSvm,
        ClassifierKind::RandomForest,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "KNN",
            ClassifierKind::LogisticRegression => "LR",
            ClassifierKind::GaussianNb => "NB",
            ClassifierKind::LinearSvm => "L-SVM",
            ClassifierKind::RandomForest => "RF",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown classifier kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub knn_k: usize,
    /// L2 penalty strength for LR and L-SVM; the loss weight is its inverse.
    pub l2_strength: f64,
    pub rf_trees: usize,
    pub rf_max_depth: Option<usize>,
    pub nb_var_floor: f64,
    pub gradient_tol: f64,
    pub max_iter: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            knn_k: 5,
            l2_strength: 1.0,
            rf_trees: 100,
            rf_max_depth: None,
            nb_var_floor: 1e-9,
            gradient_tol: 1e-6,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Knn(KnnModel),
    Linear(LinearModel),
    GaussianNb(GaussianNbModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub scaler: Scaler,
    pub params: ModelParams,
}

fn check_finite(x: &Matrix) -> Result<()> {
    match x.first_non_finite() {
        Some((row, col)) => Err(Error::NonFiniteInput { row, col }),
        None => Ok(()),
    }
}

pub fn train(kind: ClassifierKind, x: &Matrix, labels: &[u8], hp: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    if x.rows() != labels.len() {
        return Err(Error::DimMismatch {
            expected: labels.len(),
            actual: x.rows(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClassTraining);
    }
    check_finite(x)?;
    let scaler = Scaler::fit(x);
    let z = scaler.transform(x);
    let c = 1.0 / hp.l2_strength;
    let params = match kind {
        ClassifierKind::Knn => ModelParams::Knn(KnnModel {
            k: hp.knn_k,
            rows: z,
            labels: labels.to_vec(),
        }),
        ClassifierKind::LogisticRegression => ModelParams::Linear(linear::fit_linear(
            &z,
            labels,
            c,
            linear::Loss::Logistic,
            hp.gradient_tol,
            hp.max_iter,
        )),
        ClassifierKind::LinearSvm => ModelParams::Linear(linear::fit_linear(
            &z,
            labels,
            c,
            linear::Loss::SquaredHinge,
            hp.gradient_tol,
            hp.max_iter,
        )),
        ClassifierKind::GaussianNb => ModelParams::GaussianNb(GaussianNbModel::fit(&z, labels, hp.nb_var_floor)),
        ClassifierKind::RandomForest => ModelParams::Forest(forest::fit_forest(
            &z,
            labels,
            &forest::ForestParams {
                trees: hp.rf_trees,
                max_depth: hp.rf_max_depth,
                seed,
            },
        )),
    };
    Ok(TrainedModel { kind, scaler, params })
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Spy scores for each row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.cols(),
            });
        }
        check_finite(x)?;
        let z = self.scaler.transform(x);
        let scores = z
            .iter_rows()
            .map(|r| match &self.params {
                ModelParams::Knn(m) => m.score(r),
                ModelParams::Linear(m) => sigmoid(m.margin(r)),
                ModelParams::GaussianNb(m) => m.score(r),
                ModelParams::Forest(m) => m.score(r),
            })
            .collect();
        Ok(scores)
    }
}

/// Scores for a set of players, aligned with their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub player_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoreSet {
    pub fn new(player_ids: Vec<String>, scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if player_ids.len() != scores.len() || scores.len() != labels.len() {
            return Err(Error::MisalignedPlayers);
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput { row: i, col: 0 });
        }
        Ok(ScoreSet {
            player_ids,
            scores,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn auc(&self) -> Result<f64> {
        auc(&self.scores, &self.labels)
    }

    pub fn metrics(&self, threshold: f64) -> Result<MetricReport> {
        classification_metrics(&self.scores, &self.labels, threshold)
    }
}

pub fn predict_scores(model: &TrainedModel, x: &Matrix, player_ids: Vec<String>, labels: Vec<u8>) -> Result<ScoreSet> {
    ScoreSet::new(player_ids, model.predict(x)?, labels)
}
