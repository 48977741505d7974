use thiserror::Error;

/// Errors raised while validating or processing geometric data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: total dimension must be even, between 2 and 16")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("metric is not symmetric (asymmetry {0:.3e})")]
    NonSymmetricMetric(f64),

    #[error("metric is not positive definite")]
    NotPositiveDefinite,

    #[error("product structure violates {what} (residual {residual:.3e})")]
    InvalidProductStructure { what: &'static str, residual: f64 },

    #[error("structure tensor violates {what} (residual {residual:.3e})")]
    InvalidStructureTensor { what: &'static str, residual: f64 },

    #[error("tensor is not antisymmetric in its first two slots (residual {0:.3e})")]
    NotAntisymmetric(f64),

    #[error("structure tensor lies outside W1⊕W2 (residual {0:.3e})")]
    OutsideIntegrableClass(f64),

    #[error("degenerate construction after {attempts} attempts: {what}")]
    Degenerate { what: &'static str, attempts: usize },

    #[error("projector decomposition is incomplete (residual {0:.3e})")]
    IncompleteDecomposition(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("associated metric is numerically singular at the evaluation point")]
    SingularAssociatedMetric,

    #[error("invalid chart evaluation: {0}")]
    Chart(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
