//! Graph IR for the inference engine: a directed acyclic graph of typed nodes
//! over named weight tensors, with shape inference, topological execution and
//! a bit-exact two-file serialization format (`.ispm` manifest + `.ispw`
//! weight blob).

mod crc64;
mod error;
mod exec;
mod format;
mod model;
mod shape;

pub use crc64::crc64_xz;
pub use error::{FormatError, GraphError};
pub use format::{load, save, FORMAT_VERSION};
pub use model::{EdgeRef, GraphModel, Node, NodeKind};
pub use shape::ShapeMap;
