use thiserror::Error;

/// Errors reported by the solvers and file readers in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain of the function")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bracket [{lower}, {upper}] does not straddle the threshold (both ends classify as {classification})")]
    BracketNotStraddling {
        lower: f64,
        upper: f64,
        classification: &'static str,
    },

    #[error("no metastability: coupling {coupling} has no spinodal points")]
    NoMetastability { coupling: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
