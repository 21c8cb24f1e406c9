use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Kerr coefficient undefined: drive photon scale is zero")]
    UndefinedKerr,

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no resonance found (minimum |S21| = {min_abs:.4})")]
    NoResonance { min_abs: f64 },

    #[error("cannot calibrate baseline: {0}")]
    CannotCalibrate(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    #[error("non-finite residual at iteration {iteration}; last good parameters {last_good:?}")]
    NonFinite { iteration: usize, last_good: Vec<f64> },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("I/O error on {path}: {cause}")]
    Io { path: String, cause: std::io::Error },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), cause: source }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}
