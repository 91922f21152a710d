use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by feature extraction, modelling and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("multichannel unsupported: {channels} channels (convert to mono first)")]
    Multichannel { channels: u16 },

    #[error("empty signal")]
    EmptySignal,

    #[error("signal shorter than one frame ({len} < {frame_len} samples)")]
    SignalTooShort { len: usize, frame_len: usize },

    #[error("sample-rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("zero-power {0} signal, SNR undefined")]
    ZeroPower(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("feature mismatch: model expects {expected}, features are {actual}")]
    FeatureMismatch { expected: String, actual: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite log-likelihood during {0}")]
    NonFinite(&'static str),

    #[error("spectrum is not conjugate-symmetric (bin {bin})")]
    NotConjugateSymmetric { bin: usize },

    #[error("empty speaker database")]
    EmptyDatabase,

    #[error("manifest {path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
