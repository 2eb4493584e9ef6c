use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, widths or modes that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data that cannot be evaluated (non-finite values, bad tokens).
    #[error("input error: {0}")]
    Input(String),
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operation applied in the wrong state.
    #[error("state error: {0}")]
    State(String),
    /// A documented precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Exact enumeration refused because the instance is too large.
    #[error("enumeration refused: L = {len} exceeds the limit of {limit}")]
    TooLarge { len: usize, limit: usize },
    /// A loss or objective turned non-finite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Malformed record in a text file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
