use thiserror::Error;

/// Crate-wide error type.
///
/// Errors split into two families: malformed external input (files that do
/// not parse or fail envelope validation) and contract violations (arguments
/// that break a documented precondition). The CLI maps the former to exit
/// code 2 and the latter to exit code 3 via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("token id {token} out of range for alphabet size {n}")]
    TokenOutOfRange { token: u32, n: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("insufficient trials for target FPR: need at least {needed}, got {got}")]
    InsufficientTrials { needed: usize, got: usize },

    #[error("significant set is empty (significance floor too high)")]
    EmptySignificantSet,

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code the CLI uses for this error: 2 for malformed input,
    /// 3 for contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::Io(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
