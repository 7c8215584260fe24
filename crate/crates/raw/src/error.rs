use ispforge_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RawError {
    #[error("{0}")]
    BadArgument(String),

    #[error("{0}")]
    Tensor(#[from] TensorError),

    #[error("{path}: {msg}")]
    Dataset { path: String, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RawError {
    pub fn arg(msg: impl Into<String>) -> Self {
        RawError::BadArgument(msg.into())
    }
}
