//! Dense 4-D `f32` tensors plus the eager reference kernels (convolution,
//! resampling, attention, wavelets, fixed filters) shared by the rest of the
//! ispforge workspace.
//!
//! Every operation here is a pure function of its inputs with a fixed
//! per-element reduction order, so results are bit-identical from run to run
//! and independent of the optional row-parallel execution mode.

mod attention;
mod conv;
mod error;
mod filters;
pub mod io;
mod ops;
mod tensor;
mod wavelet;

pub use attention::{cbam_spatial_attention, channel_attention, rgb_gain_module, RgbGainWeights};
pub use conv::{conv2d, transpose_conv2d, ConvSpec, Pad};
pub use error::TensorError;
pub use filters::{fixed_filter, FilterKind};
pub use ops::{
    add, avg_pool2d, bias_add, clamp, concat_channels, dense, depth_to_space, gamma_correct,
    global_avg_pool, multiply, nearest_upsample2, relu, sigmoid, slice_channels, space_to_depth,
    tanh, tone_map,
};
pub use tensor::{Shape, Tensor};
pub use wavelet::{haar_dwt, haar_idwt};

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the worker-thread count used by the data-parallel kernels.
///
/// Parallel execution splits work across output channels and never changes
/// the per-element reduction order, so results stay bit-identical to the
/// serial path.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

#[cfg(test)]
pub(crate) mod tests {
    use rand::SeedableRng;

    pub fn rng(seed: u64) -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(seed)
    }
}
