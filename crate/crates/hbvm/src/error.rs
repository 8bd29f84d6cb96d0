//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by tableau construction, solvers and experiment drivers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument is outside the accepted domain of the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A documented precondition does not hold (e.g. a custom node set whose
    /// quadrature is not exact to the required degree).
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// Evaluation outside the mathematical domain of a Hamiltonian
    /// (collisions, logarithmic singularities).
    #[error("domain error: {0}")]
    DomainError(String),

    /// A time step could not be completed; carries the last solver residual.
    #[error("step failure at t = {t}: {reason} (last residual {residual:.3e})")]
    StepFailure {
        t: f64,
        residual: f64,
        reason: String,
    },

    /// A condition that should be unreachable for valid inputs.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
