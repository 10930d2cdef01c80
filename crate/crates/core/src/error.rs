use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Optimizer ran out of iterations; `best` holds the best parameters seen.
    #[error("{family} fit did not converge after {iterations} iterations (best nll {best_value})")]
    NoConvergence {
        family: &'static str,
        iterations: usize,
        best: Vec<f64>,
        best_value: f64,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable short code used as the prefix of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "E_PARSE",
            Error::Validation(_) => "E_VALIDATION",
            Error::Domain(_) => "E_DOMAIN",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::NoConvergence { .. } => "E_CONVERGENCE",
            Error::ModelFormat(_) => "E_MODEL",
            Error::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
