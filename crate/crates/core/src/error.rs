use std::io;

use thiserror::Error;

/// Broad failure classes, used by frontends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of bounds: {0}")]
    IndexOutOfBounds(String),

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("conjugate argument {0} is outside the dual-feasible domain")]
    DualInfeasible(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate rating for user {user:?}, item {item:?}")]
    DuplicateRating {
        line: usize,
        user: String,
        item: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective diverged at {context} (value {value})")]
    Divergence { context: String, value: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::DualInfeasible(_) | Error::Divergence { .. } | Error::NoConvergence { .. } => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
