//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The evaluated position sits on a transmitter or receiver.
    #[error("position coincides with a link endpoint")]
    DegenerateGeometry,
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("STFT window ({window} samples) longer than trace ({len} samples)")]
    WindowTooLong { window: usize, len: usize },
    #[error("communication duty cycle {0} outside (0, 1]")]
    InvalidCdc(f64),
    #[error("reliability horizon must be at least one slot")]
    InvalidHorizon,
    #[error("velocity is under-determined: {0} link(s) available, need at least 2")]
    InsufficientLinks(usize),
    #[error("stacked coefficient matrix is singular (condition number {0:e})")]
    SingularSystem(f64),
    #[error("trajectory needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("scenario has {slots} slots, needs more than the {bootstrap} bootstrap slots")]
    ScenarioTooShort { slots: usize, bootstrap: usize },
    #[error("trajectory generation failed after {0} rejected attempts")]
    GenerationFailed(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("bucket of {bucket} s is not a positive multiple of the {slot} s slot")]
    InvalidBucket { bucket: f64, slot: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}
