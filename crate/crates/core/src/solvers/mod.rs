//! Deterministic penalized estimators and their optimality checks.
//!
//! * [`lasso`]: coordinate descent for `Σ(yᵢ − β₀ − βᵀxᵢ)² + λ Σ|βⱼ|` on internally
//!   standardized columns.
//! * [`covariance`]: empirical correlation matrices and the validated matrix types.
//! * [`glasso`]: block coordinate descent for the graphical LASSO with element-wise
//!   penalty matrices, connected-component screening and warm-started paths.

pub mod covariance;
pub mod glasso;
pub mod lasso;

use serde::{Deserialize, Serialize};

pub use covariance::{empirical_covariance, CovarianceMatrix, Penalty, PenaltyMatrix};
pub use glasso::{
    check_kkt_glasso, fit_glasso, glasso_lambda_max, glasso_path, GlassoOptions, PrecisionEstimate,
};
pub use lasso::{check_kkt_lasso, fit_lasso, lasso_lambda_max, lasso_path, LassoFit, LassoOptions};

/// Outcome of a stationarity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl KktReport {
    pub(crate) fn new(max_residual: f64, tol: f64) -> Self {
        Self { max_residual, tol, pass: max_residual <= tol }
    }
}

#[inline]
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}
