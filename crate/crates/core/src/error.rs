use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A function was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A conditional moment was requested on an event of probability zero.
    #[error("empty conditioning event: k_min = {k_min} exceeds n = {n}")]
    EmptyCondition { k_min: u64, n: u64 },

    /// An exhaustive enumeration would exceed its configured budget.
    #[error("budget exceeded: {what} requires {required} > budget {budget}")]
    Budget {
        what: &'static str,
        required: f64,
        budget: f64,
    },

    /// Malformed matrix text.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Missing or inconsistent configuration (unresolved thresholds, schema).
    #[error("configuration error: {0}")]
    Config(String),

    /// A bisection was asked to search a range without a sign change.
    #[error("no crossing in range: {0}")]
    Bracket(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
