use thiserror::Error;

/// Errors surfaced by the field, gradient, training, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A training loop produced a non-finite loss and aborted.
    #[error("non-finite loss at step {step}: {context}")]
    NonFiniteLoss { step: usize, context: String },
    /// Parse failure in a config file or serialized matrix/CSV.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidArgument(msg.into())
    }
}
