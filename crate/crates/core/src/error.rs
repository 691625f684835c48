use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {time} lies outside the window [0, {horizon}]")]
    OutsideWindow { time: f64, horizon: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("invalid cylinder event: {0}")]
    InvalidEvent(String),

    #[error("path is not a nonnegative pure-jump path: {0}")]
    NotPureJump(String),

    #[error("rejection sampler exceeded {cap} proposals (accepted {accepted} of {proposed} so far)")]
    RejectionCap {
        cap: u64,
        proposed: u64,
        accepted: u64,
    },

    #[error("event evaluation failed at seed {seed}, chunk {chunk}, path {path}: {message}")]
    EventFailed {
        seed: u64,
        chunk: u64,
        path: u64,
        message: String,
    },

    #[error("failed to build worker pool: {0}")]
    WorkerPool(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
