//! Shared error type for the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("cannot operate on a zero-norm vector")]
    ZeroNorm,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A negative-generation rule does not apply to this caption; callers
    /// skip the kind rather than fail the run.
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("unknown word {0:?}")]
    UnknownWord(String),

    #[error("token id {id} out of vocabulary (size {vocab})")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("missing adaptive threshold for slot {slot} (have {have})")]
    MissingThreshold { slot: usize, have: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs or IO).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
