use thiserror::Error;

/// Errors raised by game construction, oracles, the model, and training.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in `{field}`: {detail}")]
    Shape { field: &'static str, detail: String },
    #[error("non-finite value in `{field}` at index {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("invalid value for `{field}`: {detail}")]
    Invalid { field: &'static str, detail: String },
    #[error("operation requires a fully observed game")]
    MaskedGame,
    #[error("game too large: {joint_actions} joint actions (limit {limit})")]
    TooLarge { joint_actions: usize, limit: usize },
    #[error("empty selection: {0}")]
    EmptySelection(&'static str),
    #[error("unknown game family `{0}`")]
    UnknownFamily(String),
    #[error("task mismatch: expected {expected}, found {found}")]
    TaskMismatch { expected: String, found: String },
    #[error("non-finite loss at step {step} (batch seed {seed})")]
    NonFiniteLoss { step: usize, seed: u64 },
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            field,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
