use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Input data does not agree with the array geometry.
    #[error("input has {got} channels but the geometry has {expected} sensors")]
    ChannelMismatch { expected: usize, got: usize },

    /// A matrix that must be inverted is singular (or numerically so).
    #[error("band {band}: matrix is singular (condition estimate {condition:.3e})")]
    Singular { band: usize, condition: f64 },

    #[error("band selection [{f_min} Hz, {f_max} Hz] is empty")]
    EmptyBandSelection { f_min: f64, f_max: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Numerical failures are distinguished from usage errors by the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. })
    }
}
