//! Uniformly valid post-selection inference for high-dimensional median
//! regression: penalized estimation, orthogonal instrumental median
//! regression, score-based confidence regions, multiplier-bootstrap
//! simultaneous bands, and a Monte Carlo harness.

pub mod bands;
pub mod data;
pub mod error;
pub mod lad;
pub mod lasso;
pub mod ortho;
pub mod sim;
pub mod stats;
pub mod variance;

pub use data::{column_loadings, sign_score, PenaltyWeights, RngStream, Sample};
pub use error::{Error, Result};
pub use ortho::{Algorithm, InferenceResult, OrthoConfig};
