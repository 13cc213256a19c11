use std::io;

use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    /// Malformed input data, reported with the 1-based line number.
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    /// A precondition violation, named after the offending argument.
    #[error("{name}: {message}")]
    Invalid { name: &'static str, message: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
