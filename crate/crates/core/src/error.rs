use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("treatment probability {0} must lie strictly inside (0, 1)")]
    InvalidProbability(f64),

    #[error("enumeration of 2^{n} assignments exceeds the cap of 2^{cap}")]
    EnumerationTooLarge { n: usize, cap: usize },

    #[error("positivity violated: event `{0}` has zero probability under the design")]
    PositivityViolation(String),

    #[error("invalid sample size: {0}")]
    InvalidSampleSize(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Gram matrix is numerically singular (last ridge tried {ridge:e}, min eigenvalue {min_eigenvalue:e}, max eigenvalue {max_eigenvalue:e})")]
    SingularGram {
        ridge: f64,
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("dependency growth rate {0} must lie in [0, 1)")]
    InvalidRate(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("operation requires the closed neighbourhood convention")]
    UnsupportedConvention,

    #[error("pair sets violate corr ⊆ assumed ⊆ full: {0}")]
    SandwichViolation(String),

    #[error("negative input: {0}")]
    NegativeInput(String),
}
