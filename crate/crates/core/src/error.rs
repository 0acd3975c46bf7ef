use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of a failure, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// A caller-supplied parameter is out of range.
    Usage,
    /// Input files (schema, dataset, model) are malformed or inconsistent.
    Validation,
    /// An internal invariant did not hold. Always a bug.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("row {row}, feature `{feature}`: {message}")]
    Record {
        row: usize,
        feature: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("{0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) => ErrorClass::Usage,
            Error::Invariant(_) => ErrorClass::Internal,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
