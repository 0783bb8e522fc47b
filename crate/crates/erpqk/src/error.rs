//! Crate-wide error type.

use std::path::PathBuf;

/// A stimulus event whose epoch window does not fit inside the recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventWindowViolation {
    /// Position of the event in the recording's event list.
    pub event_index: usize,
    /// Stimulus onset sample.
    pub onset: usize,
    /// Requested half-open window in samples, relative to the recording start.
    pub start: i64,
    pub end: i64,
}

impl std::fmt::Display for EventWindowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "event {} (onset sample {}) needs samples [{}, {})",
            self.event_index, self.onset, self.start, self.end
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input signal too short for the requested operation.
    #[error("signal too short: {0}")]
    SignalTooShort(String),

    /// One or more epoch windows exceed the recording bounds.
    #[error("epoch window out of bounds for {} event(s): {}", .0.len(),
        .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    EpochBounds(Vec<EventWindowViolation>),

    /// Model fitting is impossible on the provided data.
    #[error("fit error: {0}")]
    Fit(String),

    /// A matrix function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A resource guard was exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A metric is undefined for the given confusion counts.
    #[error("metric error: {0}")]
    Metric(String),

    /// Malformed configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A subject directory or one of its files could not be loaded.
    #[error("failed to load {path}: {detail}")]
    Load { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
