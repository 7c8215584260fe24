//! Channel, spatial and gain attention blocks built from the primitive ops.

use crate::conv::{conv2d, ConvSpec};
use crate::error::TensorError;
use crate::ops::{dense, global_avg_pool, relu, sigmoid, sigmoid_scalar};
use crate::tensor::{Shape, Tensor};

/// Squeeze-excite channel gating:
/// out = input ⊙ sigmoid(FC2(relu(FC1(GAP(input))))), broadcast per channel.
///
/// FC weights are dense-op tensors: fc1_w (c/r, c, 1, 1), fc2_w (c, c/r, 1, 1),
/// biases (1, m, 1, 1).
pub fn channel_attention(
    input: &Tensor,
    reduction: usize,
    fc1_w: &Tensor,
    fc1_b: &Tensor,
    fc2_w: &Tensor,
    fc2_b: &Tensor,
) -> Result<Tensor, TensorError> {
    let op = "channel_attention";
    let s = input.shape();
    if reduction == 0 || s.c % reduction != 0 {
        return Err(TensorError::arg(
            op,
            format!("channels {} not divisible by reduction {reduction}", s.c),
        ));
    }
    let hidden = s.c / reduction;
    if fc1_w.shape() != Shape::new(hidden, s.c, 1, 1) {
        return Err(TensorError::shape(op, "fc1 weight", Shape::new(hidden, s.c, 1, 1), fc1_w.shape()));
    }
    if fc2_w.shape() != Shape::new(s.c, hidden, 1, 1) {
        return Err(TensorError::shape(op, "fc2 weight", Shape::new(s.c, hidden, 1, 1), fc2_w.shape()));
    }
    let squeezed = global_avg_pool(input);
    let h = relu(&dense(&squeezed, fc1_w, Some(fc1_b))?);
    let gate = sigmoid(&dense(&h, fc2_w, Some(fc2_b))?);
    scale_channels(input, &gate)
}

/// CBAM-style spatial gating: stack the channelwise max map and mean map,
/// run them through a 2→1 convolution, and gate every channel with the
/// sigmoid of the result.
pub fn cbam_spatial_attention(input: &Tensor, conv: &ConvSpec) -> Result<Tensor, TensorError> {
    let op = "cbam_spatial_attention";
    if conv.in_channels != 2 || conv.out_channels != 1 {
        return Err(TensorError::arg(
            op,
            format!(
                "attention conv must map 2 channels to 1, got {}→{}",
                conv.in_channels, conv.out_channels
            ),
        ));
    }
    let s = input.shape();
    let mut maps = Tensor::zeros(Shape::new(s.n, 2, s.h, s.w));
    let inv_c = 1.0 / s.c as f32;
    for n in 0..s.n {
        for y in 0..s.h {
            for x in 0..s.w {
                let mut maxv = f32::NEG_INFINITY;
                let mut sum = 0.0f32;
                for c in 0..s.c {
                    let v = input.at(n, c, y, x);
                    maxv = maxv.max(v);
                    sum += v;
                }
                *maps.at_mut(n, 0, y, x) = maxv;
                *maps.at_mut(n, 1, y, x) = sum * inv_c;
            }
        }
    }
    let att = sigmoid(&conv2d(&maps, conv)?);
    if att.shape().h != s.h || att.shape().w != s.w {
        return Err(TensorError::shape(
            op,
            "attention map",
            format!("{}x{}", s.h, s.w),
            format!("{}x{}", att.shape().h, att.shape().w),
        ));
    }
    let mut out = input.clone();
    for n in 0..s.n {
        let gate = att.plane(n, 0);
        for c in 0..s.c {
            for (o, &g) in out.plane_mut(n, c).iter_mut().zip(gate) {
                *o *= g;
            }
        }
    }
    Ok(out)
}

/// Weights of the three-layer gain predictor used by [`rgb_gain_module`].
#[derive(Clone, Debug)]
pub struct RgbGainWeights {
    pub fc1_w: Tensor,
    pub fc1_b: Tensor,
    pub fc2_w: Tensor,
    pub fc2_b: Tensor,
    pub fc3_w: Tensor,
    pub fc3_b: Tensor,
    pub g_max: f32,
}

/// Predict one gain per channel from pooled statistics (GAP → FC×3 →
/// sigmoid·g_max) and multiply each channel by it. Used for white balance
/// and brightness on ≥ 3-channel inputs.
pub fn rgb_gain_module(input: &Tensor, w: &RgbGainWeights) -> Result<Tensor, TensorError> {
    let op = "rgb_gain_module";
    let s = input.shape();
    if s.c < 3 {
        return Err(TensorError::arg(op, format!("needs ≥ 3 channels, got {}", s.c)));
    }
    if !(w.g_max > 0.0) {
        return Err(TensorError::arg(op, format!("g_max must be > 0, got {}", w.g_max)));
    }
    if w.fc3_w.shape().n != s.c || w.fc1_w.shape().c != s.c {
        return Err(TensorError::shape(
            op,
            "gain predictor channels",
            s.c,
            format!("fc1 in {}, fc3 out {}", w.fc1_w.shape().c, w.fc3_w.shape().n),
        ));
    }
    let squeezed = global_avg_pool(input);
    let h1 = relu(&dense(&squeezed, &w.fc1_w, Some(&w.fc1_b))?);
    let h2 = relu(&dense(&h1, &w.fc2_w, Some(&w.fc2_b))?);
    let logits = dense(&h2, &w.fc3_w, Some(&w.fc3_b))?;
    let gains = logits.map(|v| sigmoid_scalar(v) * w.g_max);
    scale_channels(input, &gains)
}

fn scale_channels(input: &Tensor, per_channel: &Tensor) -> Result<Tensor, TensorError> {
    let s = input.shape();
    if per_channel.shape() != Shape::new(s.n, s.c, 1, 1) {
        return Err(TensorError::shape(
            "scale_channels",
            "gate",
            Shape::new(s.n, s.c, 1, 1),
            per_channel.shape(),
        ));
    }
    let mut out = input.clone();
    for n in 0..s.n {
        for c in 0..s.c {
            let g = per_channel.at(n, c, 0, 0);
            for v in out.plane_mut(n, c) {
                *v *= g;
            }
        }
    }
    Ok(out)
}
