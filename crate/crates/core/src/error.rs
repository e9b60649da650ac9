use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("table for questions ({x},{y}) sums to {sum}, expected 1 within {tol:e}")]
    Normalization { x: usize, y: usize, sum: f64, tol: f64 },
    #[error("negative probability {value:e} at (x={x}, y={y}, a={a}, b={b})")]
    NegativeEntry { x: usize, y: usize, a: usize, b: usize, value: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("cross-block mass {value:e} at (x={x}, y={y}, a={a}, b={b}) exceeds tolerance")]
    CrossBlockMass { x: usize, y: usize, a: usize, b: usize, value: f64 },
    #[error("block {block} weight {weight} at (x={x}, y={y}) differs from {reference} beyond tolerance")]
    WeightVaries { block: usize, x: usize, y: usize, weight: f64, reference: f64 },
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("eigenvalue {value} lies outside the {{-1, 0, 1}} band")]
    EigenvalueOutOfBand { value: f64 },
    #[error("imaginary part {value:e} of an induced probability exceeds tolerance")]
    ImaginaryProbability { value: f64 },
    #[error("{check} failed: residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { check: String, residual: f64, tol: f64 },
    #[error("multiset mismatch: {0}")]
    Multiset(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter { name, reason: reason.into() }
    }

    pub(crate) fn residual(check: impl Into<String>, residual: f64, tol: f64) -> Self {
        Error::Residual { check: check.into(), residual, tol }
    }
}
