use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A query referenced an attribute or value the dataset does not have.
    #[error("domain error in clause `{clause}`: {reason}")]
    Domain { clause: String, reason: String },

    #[error("ingestion error in {path:?} at row {row}: {reason}")]
    Ingest {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    /// Misuse of the analyser interface, e.g. target attribute constrained by `b`.
    #[error("interface error: {0}")]
    Interface(String),

    #[error("query budget of {limit} exceeded")]
    QueryBudget { limit: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
