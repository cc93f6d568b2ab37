use alloc::string::String;

/// Errors raised by the alignment core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("action {action} is not valid in environment `{env}`")]
    InvalidAction { env: String, action: String },

    #[error("invalid state for environment `{env}`")]
    InvalidState { env: String },

    #[error("policy is undefined at a reached state (step {step})")]
    PolicyUndefined { step: usize },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("drift is only defined for linear utilities")]
    UnsupportedDrift,

    #[error("unknown policy id {0}")]
    UnknownPolicy(usize),

    #[error("expected a thresholded-lexicographic utility")]
    NotLexicographic,

    #[error("phase violation: {0}")]
    PhaseViolation(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
