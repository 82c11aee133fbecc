use std::io;

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants map onto the CLI exit-code classes: numerical failures
/// (`Conditioning`, `Convergence`) exit with 3, everything else with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("target error: {0}")]
    Target(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate column {column}: zero variance")]
    DegenerateColumn { column: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    Convergence { iterations: usize, grad_norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures caused by the numbers rather than the inputs' shape.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning(_) | Error::Convergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
