use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A categorical row is not a probability distribution.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Connection failure or timeout talking to a remote model, after retries.
    #[error("transport error: {0}")]
    Transport(String),

    /// The remote model answered, but the payload violates the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Every candidate weight vanished; nothing can be selected.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("enumeration guard exceeded: {size} > {limit}")]
    GuardExceeded { size: usize, limit: usize },

    /// A broken internal invariant (e.g. a budget schedule that runs dry early).
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures that originate in the model backend transport or protocol.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::Protocol(_))
    }
}
