//! Error types shared by every module of the crate.

use thiserror::Error;

use crate::exprlang::{EvalError, ParseError};

/// Errors raised while building, certifying or evaluating a system pair.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `A(index)` is numerically singular (reciprocal condition estimate below threshold).
    #[error("coefficient matrix A({index}) is numerically singular (rcond = {rcond:.3e})")]
    SingularCoefficient { index: usize, rcond: f64 },

    /// A time index falls outside the range for which data is available.
    #[error("index {index} is outside the working horizon {horizon}")]
    OutOfHorizon { index: usize, horizon: usize },

    /// Vector or matrix shapes do not agree with the system dimension.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// No tail envelope applies to a series and the weight has no cutoff.
    #[error("series tail is not summable with the declared families: {0}")]
    TailNotSummable(String),

    /// `||A(index)^-1|| * gamma(index) >= 1`, so backward continuation is not a contraction.
    #[error("backward step at index {index} is not a contraction (factor {factor:.6})")]
    P6Violated { index: usize, factor: f64 },

    /// A fixed-point iteration exhausted its budget.
    #[error("fixed-point iteration did not converge at {context} after {iterations} iterations")]
    NoConvergence { context: String, iterations: usize },

    /// A forward iterate left the overflow guard.
    #[error("trajectory overflow at index {index} (|y| = {norm:.3e})")]
    Overflow { index: usize, norm: f64 },

    /// An operation that needs `Q = 0` was called on a system with an unstable part.
    #[error("operation requires the contraction case (Q identically zero)")]
    NotContractionCase,

    /// The equilibrium solver did not reach its residual floor.
    #[error("no equilibrium found (best residual {residual:.3e})")]
    NoEquilibrium { residual: f64 },

    /// The candidate equilibrium is not fixed at every time index.
    #[error("equilibrium is not stationary: residual {residual:.3e} at index {index}")]
    NotStationary { index: usize, residual: f64 },

    /// A certificate does not match the components it is being used with.
    #[error("certificate was issued for a different system pair")]
    CertificateMismatch,

    /// The certificate does not satisfy the preconditions of the requested construction.
    #[error("certificate does not support this construction: {0}")]
    Uncertified(String),

    /// Invalid user input (configuration, families, parameters).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    /// True for errors caused by the user's input rather than by numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Parse(_)
                | Error::DimensionMismatch { .. }
                | Error::TailNotSummable(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
