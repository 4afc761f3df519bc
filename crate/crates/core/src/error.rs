use thiserror::Error;

/// Errors produced by the modem builders, metrics and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid attenuation {0} dB: must be positive")]
    InvalidAttenuation(f64),

    #[error("index {index} out of range 0..{bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("path delay {delay_s:e} s maps to lag {lag} beyond channel span of {span} taps")]
    DelayExceedsSpan { delay_s: f64, lag: usize, span: usize },

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("invalid guard count {guard}: 2*N_G must be below K = {subcarriers}")]
    InvalidGuard { guard: usize, subcarriers: usize },

    #[error("reference vector has zero energy")]
    ZeroReference,

    #[error("OOB threshold {threshold_db} dB not achievable (best {best_db:.2} dB at N_G = {max_guard})")]
    NotAchievable {
        threshold_db: f64,
        best_db: f64,
        max_guard: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::DimensionMismatch {
        expected: expected.into(),
        got: got.into(),
    }
}
