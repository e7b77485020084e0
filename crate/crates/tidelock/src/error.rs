//! Error taxonomy shared across the laboratory.
//!
//! Errors are grouped by how a caller should react: configuration errors
//! mean the input never described a valid model, verification errors mean a
//! computed object violates a structural expectation, numerical errors mean
//! an algorithm failed to produce a trustworthy result.

use thiserror::Error;

/// Process exit code for invalid input or configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for a failed verification verdict.
pub const EXIT_VERIFICATION: i32 = 3;
/// Process exit code for a numerical failure (divergence, degeneracy).
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data cannot define a body (no points, nonpositive masses, ...).
    #[error("degenerate body: {0}")]
    DegenerateBody(String),

    /// A spectral gap or chart condition failed; the requested frame or
    /// coordinate patch does not exist at this configuration.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The kinetic quadratic form is not positive definite at this state.
    #[error("kinetic form degenerate: {0}")]
    KineticDegenerate(String),

    /// The generalized mass matrix could not be factored.
    #[error("singular mass matrix (condition estimate {cond:.3e})")]
    SingularMass { cond: f64 },

    /// A scalar function has no nondegenerate minimum in the search range.
    #[error("no nondegenerate minimum: {0}")]
    NoMinimum(String),

    /// Newton iteration failed to converge.
    #[error("newton iteration diverged: {0}")]
    NewtonDiverged(String),

    /// A computed equilibrium violates the expected moment ordering.
    #[error("moment ordering violated: {0}")]
    OrderingViolation(String),

    /// The transversal Hessian at a computed equilibrium is not positive
    /// definite.
    #[error("transversal hessian not positive definite: {0}")]
    IndefiniteHessian(String),

    /// A requested check ran to completion and the verdict is negative.
    #[error("verification failed: {0}")]
    Verification(String),

    /// Invalid run configuration (unknown keys, inconsistent dimensions,
    /// out-of-range values).
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Map an error to the CLI exit-code contract (2 config, 3 verification,
    /// 4 numerical).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
            Error::OrderingViolation(_) | Error::IndefiniteHessian(_) | Error::Verification(_) => {
                EXIT_VERIFICATION
            }
            _ => EXIT_NUMERICAL,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
