use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial must have at least one coefficient")]
    EmptyPolynomial,
    #[error("leading coefficient a_0 must be 1, got {0}")]
    NotMonic(f64),
    #[error("delay must be at least 1")]
    ZeroDelay,
    #[error("constant coefficient b_0 must be nonzero")]
    ZeroLeadingCoefficient,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("non-finite value {value} in {what} at t = {t}")]
    NonFinite {
        what: &'static str,
        t: i64,
        value: f64,
    },
    #[error("beta_0 estimate {value} is below the admissible magnitude {floor}")]
    Beta0OutOfBox { value: f64, floor: f64 },
    #[error("time {0} is outside the available trace window")]
    OutOfWindow(i64),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
