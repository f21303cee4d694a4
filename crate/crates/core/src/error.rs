use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("build pad {pad} is smaller than required degree {required}")]
    PadTooSmall { pad: usize, required: usize },

    #[error("operator is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("eigensolver did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("perturbed Hamiltonian is unstable: {0}")]
    StabilityFailure(String),

    #[error("finite-difference stencil degenerate: step-halving change {change:.3e} exceeds estimate {estimate:.3e}")]
    StencilDegenerate { change: f64, estimate: f64 },

    #[error("source strength nu = {nu} violates nu > -m*omega^2 = {limit}")]
    UnstableNu { nu: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
