//! Stability selection calibrated by the stability score.
//!
//! The crate wraps penalized estimators (LASSO regression, graphical LASSO) in
//! resampling, scores every (penalty, threshold) pair by how unlikely its
//! stable-in / unstable / stable-out classification of features would be if all
//! features were selected uniformly at random, and picks the best-scoring pair,
//! optionally under an upper bound on the expected number of false positives.

pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod multiblock;
pub mod parallel;
pub mod resampling;
pub mod rng;
pub mod simulate;
pub mod stability;
pub mod solvers;

pub use data::DesignMatrix;
pub use error::{Error, Result};
pub use parallel::Execution;
