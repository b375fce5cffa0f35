use thiserror::Error;

use crate::matrix::FactorPair;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations (last estimate {estimate:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        estimate: f64,
    },

    /// Both the stacked factors and the gradient vanish, so the step size
    /// denominator is zero.
    #[error("step size undefined: factors and gradient are both zero")]
    StationaryStart,

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective {
        iteration: usize,
        last_finite: Box<FactorPair>,
    },

    #[error("objective increased at iteration {iteration}: {previous:e} -> {current:e}")]
    DescentViolation {
        iteration: usize,
        previous: f64,
        current: f64,
        last: Box<FactorPair>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by floating-point trouble rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NoConvergence { .. }
                | Error::NonFiniteObjective { .. }
                | Error::DescentViolation { .. }
        )
    }
}
