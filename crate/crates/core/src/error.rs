use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("timestamps not strictly increasing at sample {index} ({prev} -> {next})")]
    NonMonotoneTime { index: usize, prev: f64, next: f64 },

    #[error("malformed input: {0}")]
    Structure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid trajectory spec: {0}")]
    InvalidSpec(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("insufficient periodicity: {found} interior peaks detected, need at least 1")]
    InsufficientPeriodicity { found: usize },

    #[error("gain mode mismatch: gain trained for {gain}, requested {requested}")]
    ModeMismatch { gain: String, requested: String },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("attitude matrix is gimbal-degenerate (|C[2,0]| = {0})")]
    GimbalDegenerate(f64),

    #[error("no usable runs: {0}")]
    NoUsableRuns(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Parse,
    Computation,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidSpec(_) | Error::ModeMismatch { .. } => ErrorClass::Config,
            Error::Parse { .. } | Error::NonMonotoneTime { .. } | Error::Structure(_) | Error::Io(_) => {
                ErrorClass::Parse
            }
            _ => ErrorClass::Computation,
        }
    }
}
