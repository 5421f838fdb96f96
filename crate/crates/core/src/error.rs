use thiserror::Error;

use crate::discretization::StateVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity was requested outside the parameter region where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    /// The banded factorization hit a zero (or numerically negligible) pivot.
    #[error("singular Jacobian after {iterations} Newton iterations")]
    SingularJacobian {
        iterations: usize,
        best: Box<StateVector>,
    },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<StateVector>,
    },

    #[error("branch switching failed: {0}")]
    SwitchFailed(String),

    #[error("continuation stalled: step below {ds_min:.1e} at parameter {value}")]
    BranchStalled { ds_min: f64, value: f64 },

    #[error("backward Euler step rejected (dt = {dt:.3e})")]
    StepRejected { dt: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed CSV {path}, line {line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Best iterate carried by a solver failure, if any.
    pub fn best_iterate(&self) -> Option<&StateVector> {
        match self {
            Error::SingularJacobian { best, .. } | Error::NoConvergence { best, .. } => Some(best),
            _ => None,
        }
    }
}
