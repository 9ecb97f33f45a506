use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionError(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("morphism is not invertible")]
    SingularMorphism,

    #[error("degenerate symplectic structure: {0}")]
    DegenerateStructure(String),

    #[error("generator is not self-adjoint (deviation {0:.3e})")]
    InvalidGenerator(f64),

    #[error("hamiltonian is not valid: {0}")]
    InvalidHamiltonian(String),

    #[error("numerical failure: {0}")]
    NumericsError(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("caustic detected at t = {time:.6} (|dv/dq| = {gradient:.3e})")]
    CausticError { time: f64, gradient: f64 },

    #[error("trajectory left the grid at t = {time:.6} (q = {position:.6})")]
    DomainExit { time: f64, position: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
