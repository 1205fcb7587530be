use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular design: normal equations are not positive definite")]
    SingularDesign,

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence {
        what: &'static str,
        iterations: usize,
        /// Last iterate (coefficients or epsilon) at the point of failure.
        last: Vec<f64>,
    },

    #[error("clever covariate is identically zero")]
    DegenerateCovariate,

    #[error("empty input")]
    EmptyInput,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("outcome is constant; cannot scale to [0, 1]")]
    DegenerateOutcome,

    #[error("treatment arm a={0} has no observations")]
    EmptyArm(u8),

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("all {0} half-sample splits failed")]
    AllSplitsFailed(usize),

    #[error("{failed} of {total} replications failed (first: replication {first_index}: {first_message})")]
    ReplicationFailures {
        failed: usize,
        total: usize,
        first_index: usize,
        first_message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
