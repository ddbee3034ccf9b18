//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("mode at {freq_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    AboveNyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("kernel violates its support/analyticity condition: {0}")]
    KernelSupport(String),

    #[error("envelope segment too short: {available} samples available, {required} required")]
    SegmentTooShort { available: usize, required: usize },

    #[error("envelope value at segment start is zero")]
    ZeroAtSegmentStart,

    #[error("envelope is not normalized at segment start (value {0})")]
    NotNormalized(f64),

    #[error("signal is identically zero")]
    ZeroSignal,

    #[error("non-positive envelope value in the regression segment")]
    NonPositiveEnvelope,

    #[error("fitted slope {0} is not decaying")]
    NonDecaying(f64),

    #[error("degenerate resonance peak: {0}")]
    DegeneratePeak(String),

    #[error("half-power crossing not found on the {0} side of the peak")]
    CrossingNotFound(&'static str),

    #[error("singular or rank-deficient linear system: {0}")]
    Singular(String),

    #[error("no stable pole within the search window around {target_hz} Hz")]
    NoPoleNearTarget { target_hz: f64 },

    #[error("too many records skipped: {skipped} of {total}")]
    TooManySkipped { skipped: usize, total: usize },

    #[error("all optimizer restarts failed")]
    AllRestartsFailed,

    #[error("missing fit for {0}")]
    MissingFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
