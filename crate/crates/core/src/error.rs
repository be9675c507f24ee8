use std::path::PathBuf;

/// Errors raised by the solver, simulator and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// No allocation satisfies the named constraint.
    #[error("infeasible: constraint {constraint} cannot be met ({detail})")]
    Infeasible {
        constraint: &'static str,
        detail: String,
    },

    /// An iterative method failed to converge.
    #[error("numerical failure in {method} after {iterations} iterations: {detail}")]
    Numerical {
        method: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("instance too large for exhaustive search: N = {n}, limit is {limit}")]
    SizeGuard { n: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        msg: msg.into(),
    }
}
