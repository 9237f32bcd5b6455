use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or missing configuration; `key` names the offending field.
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// An argument outside the domain of a model (negative distance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Operands whose shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A simulation invariant was violated at runtime.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Failure inside one campaign cell.
    #[error("campaign cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) | Error::Dimension(_) => 3,
            Error::Cell { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
