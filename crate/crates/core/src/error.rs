use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet error: {0}")]
    Alphabet(String),

    #[error("invalid gene: {0}")]
    InvalidGene(String),

    #[error("parse error at symbol {index}: unrecognized token `{token}`")]
    Parse { index: usize, token: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user input (bad config, names, files) as
    /// opposed to failures inside the engine.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Dimension { .. })
    }
}
