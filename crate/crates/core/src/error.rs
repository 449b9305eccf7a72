use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator, detector, or CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented constraint.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Malformed input handed to an operation (length mismatch, duplicates).
    #[error("invalid input: {0}")]
    Input(String),

    /// Operation called in the wrong lifecycle state.
    #[error("invalid state: {0}")]
    State(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
