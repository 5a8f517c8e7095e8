use thiserror::Error;

#[derive(Debug, Error)]
pub enum LioError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("IMU window is empty")]
    EmptyImuWindow,

    #[error("IMU dropout: gap of {gap:.4} s at t = {at:.6} exceeds {max:.4} s")]
    ImuDropout { at: f64, gap: f64, max: f64 },

    #[error("time {t:.6} outside motion span [{start:.6}, {end:.6}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("submap is empty")]
    EmptyMap,

    #[error("no accepted correspondences")]
    NoCorrespondences,

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("non-finite solve: {0}")]
    NonFiniteSolve(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LioError>;
