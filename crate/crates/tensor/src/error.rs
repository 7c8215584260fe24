use thiserror::Error;

/// Errors raised by tensor construction and the eager kernels.
#[derive(Debug, Clone, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch on {dimension}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        dimension: &'static str,
        expected: String,
        got: String,
    },

    #[error("{op}: {msg}")]
    BadArgument { op: &'static str, msg: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl TensorError {
    pub fn shape(
        op: &'static str,
        dimension: &'static str,
        expected: impl ToString,
        got: impl ToString,
    ) -> Self {
        TensorError::ShapeMismatch {
            op,
            dimension,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn arg(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::BadArgument { op, msg: msg.into() }
    }
}

impl From<std::io::Error> for TensorError {
    fn from(e: std::io::Error) -> Self {
        TensorError::Io(e.to_string())
    }
}
