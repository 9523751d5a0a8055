use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("covariance is not symmetric: |C[{row}][{col}] - C[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("covariance is not positive definite: eigenvalue {value:e} at position {index}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("covariance must be square and non-empty, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("funnel needs at least one x-coordinate (d >= 1)")]
    EmptyFunnel,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("segment length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("extension spacing must be nonzero")]
    ZeroSpacing,
    #[error("truncation window needs {required} lattice points per side, cap is {cap}")]
    WindowTooLarge { required: u64, cap: u64 },
    #[error("lattice sum did not converge within {steps} points per side")]
    DivergentLatticeSum { steps: u64 },
    #[error("quadrature did not converge: refinement changed the result by {change:e}")]
    QuadratureNotConverged { change: f64 },
    #[error("enumeration over 2^{requested} doubling paths exceeds the budget of 2^{max}")]
    EnumerationTooLarge { requested: u32, max: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Unsupported(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
