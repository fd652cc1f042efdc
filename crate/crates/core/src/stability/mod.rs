//! Stability score, PFER bounds, calibration grids and (λ, π) calibration, plus
//! information-criterion calibration of the graphical LASSO for comparison.

pub mod criteria;
pub mod grid;
pub mod pfer;
pub mod score;
pub mod surface;

pub use criteria::{information_criteria, Criterion, InformationCriteria, DEFAULT_EBIC_GAMMA};
pub use grid::{build_pi_grid, glasso_lambda_grid, lasso_lambda_grid, CalibrationGrid, LambdaGrid};
pub use pfer::{pfer, pfer_mb, pfer_ss, PferMethod};
pub use score::{categorize, stability_score, Category};
pub use surface::{calibrate, calibrate_error_control, score_surface, CalibrationResult, StabilityScoreSurface};
