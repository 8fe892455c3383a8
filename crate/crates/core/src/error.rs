use thiserror::Error;

pub type Result<T> = std::result::Result<T, McgError>;

#[derive(Debug, Error)]
pub enum McgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl McgError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        McgError::Argument(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        McgError::State(msg.into())
    }
}
