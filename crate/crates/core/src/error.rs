use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("iterates diverged at iteration {t}")]
    Divergence { t: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("solver did not converge after {iters} iterations (last gradient norm {grad_norm:e})")]
    NonConvergence { iters: usize, grad_norm: f64 },

    #[error("transient not reached: log-slope {slope:e} per iteration over the tail window")]
    TransientNotReached { slope: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("cannot write output {}: {source}", path.display())]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
