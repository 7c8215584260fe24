//! Quality metrics and loss terms, evaluated identically during training and
//! benchmarking. Scalar reductions run in f64 over the f32 tensor data.

mod losses;
mod psnr;
mod spec;
mod ssim;

pub use losses::{
    charbonnier, cosine_loss, edge_loss, histogram_loss, l1, mse, patch_loss, patch_loss_detail,
    PatchMode,
};
pub use psnr::{psnr, psnr_from_mse, PSNR_CAP_DB};
pub use spec::{evaluate, LossSpec, LossTerm, MetricReport};
pub use ssim::ssim;

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum MetricError {
    #[error("{op}: shape mismatch: {a} vs {b}")]
    ShapeMismatch {
        op: &'static str,
        a: String,
        b: String,
    },

    #[error("{op}: {msg}")]
    BadArgument { op: &'static str, msg: String },

    #[error("{0}")]
    Tensor(#[from] ispforge_tensor::TensorError),
}

impl MetricError {
    fn arg(op: &'static str, msg: impl Into<String>) -> Self {
        MetricError::BadArgument {
            op,
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_shapes(
    op: &'static str,
    a: &ispforge_tensor::Tensor,
    b: &ispforge_tensor::Tensor,
) -> Result<(), MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch {
            op,
            a: a.shape().to_string(),
            b: b.shape().to_string(),
        });
    }
    Ok(())
}
