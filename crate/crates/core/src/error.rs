use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode PNG: {message}")]
    Png { path: PathBuf, message: String },

    #[error("unsupported image: {0}")]
    Unsupported(String),

    #[error("tensor format: {0}")]
    Format(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("seed placement failed: {0}")]
    Placement(String),

    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:.3e}){hint}"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        hint: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
