use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge after {terms} terms (partial sum {partial_sum})")]
    Convergence { partial_sum: f64, terms: usize },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("trace would contain no samples (duration {t_contact} s at {sample_rate} Hz)")]
    EmptyTrace { t_contact: f64, sample_rate: f64 },

    #[error("cannot normalize: {0}")]
    Normalization(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("effusivity range outside grid: {0}")]
    Range(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid record `{name}`: {reason}")]
    Validation { name: String, reason: String },

    #[error("database is empty")]
    EmptyDatabase,

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("fit did not converge after {iterations} iterations (best sse {best_sse})")]
    NoConvergence { best_sse: f64, iterations: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

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
        match e.position() {
            Some(pos) => Error::Parse {
                line: pos.line() as usize,
                column: 0,
                message: e.to_string(),
            },
            None => Error::Format(e.to_string()),
        }
    }
}
