//! Training support: static per-node backward rules over a restricted op
//! set, an f64 shadow evaluator for finite-difference validation, Adam, and
//! a seeded mini-batch fit loop.

mod adam;
mod backward;
mod fit;
mod gradcheck;
mod shadow;

pub use adam::{AdamConfig, TrainState};
pub use backward::{backward, BackwardResult};
pub use fit::{eval_mean_metrics, fit, write_history_tsv, FitOptions, HistoryRow};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use shadow::shadow_loss;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("node '{node}' ({kind}) is not differentiable")]
    NonDifferentiableNode { node: String, kind: String },

    #[error("loss term '{0}' is not differentiable; use l1/mse/charbonnier/patch(rectified)")]
    NonDifferentiableLoss(String),

    #[error("gradient supplied for unknown weight '{0}'")]
    UnknownGradientKey(String),

    #[error("training diverged: non-finite values at step {step}")]
    NonFinite { step: u64 },

    #[error("{0}")]
    BadArgument(String),

    #[error("{0}")]
    Graph(#[from] ispforge_graph::GraphError),

    #[error("{0}")]
    Metric(#[from] ispforge_metrics::MetricError),

    #[error("{0}")]
    Tensor(#[from] ispforge_tensor::TensorError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Format(#[from] ispforge_graph::FormatError),

    #[error("{0}")]
    Raw(#[from] ispforge_raw::RawError),
}
