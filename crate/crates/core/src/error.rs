use thiserror::Error;

/// Errors produced by the pricing engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpgError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("reference coordinate {0} lies outside [-1, 1]")]
    OutsideReference(f64),

    #[error("quadrature rule needs at least one point")]
    EmptyQuadrature,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time to maturity {tau} outside [0, {maturity}]")]
    TimeOutOfRange { tau: f64, maturity: f64 },

    #[error("evaluation point {0} lies outside the computational domain")]
    OutsideDomain(f64),

    #[error("projected SOR did not converge in {iterations} iterations (residual {residual:e})")]
    LcpNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no contact set found: {0}")]
    NoContact(String),
}

pub type Result<T> = std::result::Result<T, DpgError>;
