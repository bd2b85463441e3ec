use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(ValidationReport),

    #[error("schema error at {path} (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("anchor is not feasible for the nominal system (max residual {residual:e})")]
    InfeasibleAnchor { residual: f64 },

    #[error("strong Slater condition fails for the perturbed system (margin {margin:e})")]
    SscViolated { margin: f64 },

    #[error(
        "internal disagreement between Slater verdicts: lp margin {margin:e}, hull gap {hull_gap:e}"
    )]
    SscDisagreement { margin: f64, hull_gap: f64 },

    #[error("feasible set is empty")]
    Infeasible,

    #[error("{what} did not converge after {iterations} iterations (last gap {gap:e})")]
    NonConvergent {
        what: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("partition ordering violated beyond slack: {details}")]
    OrderingViolation { details: String },

    #[error("random generation gave up after {0} attempts")]
    RetryExhausted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Schema { .. }
            | Error::InvalidArgument(_)
            | Error::InfeasibleAnchor { .. }
            | Error::SscViolated { .. } => 2,
            Error::NonConvergent { .. } => 3,
            _ => 1,
        }
    }
}
