use thiserror::Error;

/// Errors raised by the estimators, the resampling machinery and the calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("selector failed on iteration {iteration}: {source}")]
    Selector {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no feasible cell with a finite stability score; consider raising the PFER threshold (eta)")]
    NoFeasibleCell,

    #[error("block {block}: {source}")]
    Block {
        block: String,
        #[source]
        source: Box<Error>,
    },

    #[error("joint penalty grid has {cells} cells, above the limit of {limit}; use blockwise calibration instead")]
    GridTooLarge { cells: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
