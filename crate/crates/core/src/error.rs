//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced while loading data, validating configuration, or running
/// simulations.
#[derive(Debug, Error)]
pub enum Error {
    /// A data file contained a line or record that could not be parsed.
    #[error("{file}:{line}: {message}")]
    Parse {
        /// File the bad record came from.
        file: String,
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        message: String,
    },

    /// A configuration value or combination of values is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments outside its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A JSON document failed to (de)serialize.
    #[error("json error in {file}: {source}")]
    Json {
        /// File being read or written.
        file: String,
        /// Underlying serde error.
        #[source]
        source: serde_json::Error,
    },

    /// CSV output failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn json(file: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            file: file.into(),
            source,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
