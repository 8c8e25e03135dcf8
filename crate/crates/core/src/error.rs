use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("too few rows: need at least {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },
    #[error("target column is constant; cannot invert scaling")]
    ConstantTargetColumn,
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("covariance is not positive definite after diagonal loading")]
    NotPositiveDefinite,
    #[error("substitute set has {have} rows but {needed} poison points were requested")]
    SubstituteTooSmall { needed: usize, have: usize },
    #[error("degenerate feasibility domain [{0}, {1}]")]
    DegenerateDomain(f64, f64),
    #[error("model query failed: {0}")]
    OracleFailure(String),
    #[error("trim would retain {0} rows; at least 2 are required")]
    TooFewRetained(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("division by zero: clean {0} is zero")]
    DivisionByZero(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
