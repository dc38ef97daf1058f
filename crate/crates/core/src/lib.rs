//! Deception detection in long group-interaction videos from per-frame
//! behavioural features.
//!
//! The pipeline samples clips from each player's feature streams, pools
//! frames into clip vectors, encodes every player as fixed-length vectors
//! (histograms, Fisher Vectors and cross-game rank meta-features), trains a
//! classifier per feature family and fuses the family scores with
//! grid-searched convex weights. Evaluation is game-disjoint
//! cross-validation; a synthetic generator with planted effects makes every
//! stage checkable without the original video corpus.

pub mod bundle;
pub mod classifiers;
pub mod data;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod liarrank;
pub mod matrix;
pub mod sampling;

pub use error::{Error, Result};
pub use matrix::Matrix;
