//! Fixed-length player encodings: histograms and Fisher Vectors.

pub mod fisher;
pub mod gmm;
pub mod histogram;

pub use fisher::encode_fisher_vector;
pub use gmm::{fit_gmm, GmmConfig, GmmModel, GmmTerms};
pub use histogram::{encode_histogram, fit_bins, BinEdges, HistogramEncoding, HistogramMode, Normalize};
