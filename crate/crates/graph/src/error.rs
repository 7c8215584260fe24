use ispforge_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node id '{0}'")]
    DuplicateNodeId(String),

    #[error("node '{node}' references unknown {what} '{name}'")]
    UnknownRef {
        node: String,
        what: &'static str,
        name: String,
    },

    #[error("graph contains a cycle involving node '{0}'")]
    Cycle(String),

    #[error("unknown graph input '{0}'")]
    UnknownInput(String),

    #[error("missing input tensor for port '{0}'")]
    MissingInput(String),

    #[error(
        "shape conflict: node '{consumer}' expects {expected} but producer '{producer}' yields {got}"
    )]
    ShapeConflict {
        consumer: String,
        producer: String,
        expected: String,
        got: String,
    },

    #[error("node '{node}': weight '{weight}' has shape {got}, expected {expected}")]
    WeightShape {
        node: String,
        weight: String,
        expected: String,
        got: String,
    },

    #[error("node '{node}': {source}")]
    Op {
        node: String,
        source: TensorError,
    },

    #[error("node '{node}': {msg}")]
    Attr { node: String, msg: String },

    #[error("{0}")]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: unsupported format version '{found}', expected '{expected}'")]
    Version {
        path: String,
        found: String,
        expected: String,
    },

    #[error("{path}:{line}: unknown node kind '{kind}'")]
    UnknownKind {
        path: String,
        line: usize,
        kind: String,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("weight '{name}': checksum mismatch (stored {stored:016x}, computed {computed:016x})")]
    Checksum {
        name: String,
        stored: u64,
        computed: u64,
    },

    #[error("weight blob holds {got} bytes, manifest implies {expected}")]
    BlobSize { expected: usize, got: usize },

    #[error("manifest references weight '{0}' missing from the weight table")]
    DanglingWeight(String),

    #[error("loaded model is invalid: {0}")]
    Invalid(#[from] GraphError),

    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}
