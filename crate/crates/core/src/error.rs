use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file or record.
    #[error("format error: {0}")]
    Format(String),

    /// A referenced id (concept, item) does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Input that a kernel metric cannot represent, such as a zero vector under cosine.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Inconsistent or missing configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Factorization failure, non-finite values, divergence.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The requested measure is not defined for this family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Instance too large for exhaustive search.
    #[error("instance too large: {0}")]
    Size(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
