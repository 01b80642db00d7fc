use thiserror::Error;

use crate::expr::ParseError;

/// Errors produced by mean constructors, solvers and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A deviation (scalar or generalized) failed one of its defining axioms.
    #[error("invalid deviation: {0}")]
    InvalidDeviation(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("point lies outside the convex hull (distance {distance:e})")]
    HullViolation { distance: f64 },

    /// The supplied function does not behave like a mean on the sampled input.
    #[error("not a mean: {0}")]
    NotAMean(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid sampler: {0}")]
    InvalidSampler(String),

    #[error("expression error: {0}")]
    Expression(#[from] ParseError),

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl MeanError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        MeanError::InvalidArgument(msg.into())
    }

    /// True when the error is a solver failure rather than bad input.
    pub fn is_no_convergence(&self) -> bool {
        matches!(self, MeanError::NoConvergence { .. })
    }
}

pub type Result<T, E = MeanError> = std::result::Result<T, E>;
