//! Game-disjoint cross-validation, the experiment runner with ablation and
//! ensemble search, and the synthetic dataset generator.

pub mod config;
pub mod cv;
pub mod experiment;
pub mod features;
pub mod report;
pub mod synth;

pub use config::{EncoderConfig, EnsembleSearchConfig, ExperimentConfig, FamilyConfig};
pub use cv::{check_disjoint, make_cv_plan, CvPlan, Fold};
pub use experiment::{fit_all, run_experiment, run_experiment_with_folds, EncodingChoice, PipelineFit};
pub use features::{Cohort, FittedEncoder};
pub use report::ExperimentReport;
pub use synth::{generate_synthetic, SyntheticSpec};
