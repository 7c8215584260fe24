//! Elementwise and rearrangement primitives with definitional semantics.

use crate::conv::out_dim;
use crate::error::TensorError;
use crate::tensor::{check_same_shape, Shape, Tensor};

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}

#[inline]
pub(crate) fn sigmoid_scalar(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

pub fn tanh(input: &Tensor) -> Tensor {
    input.map(f32::tanh)
}

pub fn clamp(input: &Tensor, lo: f32, hi: f32) -> Result<Tensor, TensorError> {
    if !(lo < hi) {
        return Err(TensorError::arg("clamp", format!("need lo < hi, got {lo}..{hi}")));
    }
    Ok(input.map(|v| v.clamp(lo, hi)))
}

/// Elementwise sum of two or more same-shape tensors.
pub fn add(inputs: &[&Tensor]) -> Result<Tensor, TensorError> {
    if inputs.is_empty() {
        return Err(TensorError::arg("add", "needs at least one input"));
    }
    let mut out = inputs[0].clone();
    for t in &inputs[1..] {
        check_same_shape("add", inputs[0], t)?;
        for (o, &v) in out.data_mut().iter_mut().zip(t.data()) {
            *o += v;
        }
    }
    Ok(out)
}

pub fn multiply(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    check_same_shape("multiply", a, b)?;
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o *= v;
    }
    Ok(out)
}

/// Add a per-channel bias, broadcast over batch and space. `bias` has shape
/// (1, c, 1, 1).
pub fn bias_add(input: &Tensor, bias: &Tensor) -> Result<Tensor, TensorError> {
    let s = input.shape();
    let bs = bias.shape();
    if bs != Shape::new(1, s.c, 1, 1) {
        return Err(TensorError::shape("bias_add", "bias", Shape::new(1, s.c, 1, 1), bs));
    }
    let mut out = input.clone();
    for n in 0..s.n {
        for c in 0..s.c {
            let b = bias.data()[c];
            for v in out.plane_mut(n, c) {
                *v += b;
            }
        }
    }
    Ok(out)
}

pub fn concat_channels(inputs: &[&Tensor]) -> Result<Tensor, TensorError> {
    if inputs.is_empty() {
        return Err(TensorError::arg("concat_channels", "needs at least one input"));
    }
    let first = inputs[0].shape();
    let mut c_total = 0;
    for t in inputs {
        let s = t.shape();
        if (s.n, s.h, s.w) != (first.n, first.h, first.w) {
            return Err(TensorError::shape("concat_channels", "spatial/batch dims", first, s));
        }
        c_total += s.c;
    }
    let out_shape = Shape::new(first.n, c_total, first.h, first.w);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..first.n {
        let mut co = 0;
        for t in inputs {
            for c in 0..t.shape().c {
                out.plane_mut(n, co).copy_from_slice(t.plane(n, c));
                co += 1;
            }
        }
    }
    Ok(out)
}

/// Channels [start, end) of the input.
pub fn slice_channels(input: &Tensor, start: usize, end: usize) -> Result<Tensor, TensorError> {
    let s = input.shape();
    if start >= end || end > s.c {
        return Err(TensorError::arg(
            "slice_channels",
            format!("range {start}..{end} invalid for {} channels", s.c),
        ));
    }
    let out_shape = Shape::new(s.n, end - start, s.h, s.w);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for (co, c) in (start..end).enumerate() {
            out.plane_mut(n, co).copy_from_slice(input.plane(n, c));
        }
    }
    Ok(out)
}

/// Rearrange channel groups into spatial blocks:
/// out[n, c, b·y+i, b·x+j] = in[n, c·b² + i·b + j, y, x].
pub fn depth_to_space(input: &Tensor, block: usize) -> Result<Tensor, TensorError> {
    let s = input.shape();
    if block == 0 || s.c % (block * block) != 0 {
        return Err(TensorError::arg(
            "depth_to_space",
            format!("channels {} not divisible by block² = {}", s.c, block * block),
        ));
    }
    let oc = s.c / (block * block);
    let out_shape = Shape::new(s.n, oc, s.h * block, s.w * block);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for c in 0..oc {
            for i in 0..block {
                for j in 0..block {
                    let ic = c * block * block + i * block + j;
                    for y in 0..s.h {
                        for x in 0..s.w {
                            *out.at_mut(n, c, block * y + i, block * x + j) = input.at(n, ic, y, x);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`depth_to_space`].
pub fn space_to_depth(input: &Tensor, block: usize) -> Result<Tensor, TensorError> {
    let s = input.shape();
    if block == 0 || s.h % block != 0 || s.w % block != 0 {
        return Err(TensorError::arg(
            "space_to_depth",
            format!("spatial dims {}x{} not divisible by block {}", s.h, s.w, block),
        ));
    }
    let out_shape = Shape::new(s.n, s.c * block * block, s.h / block, s.w / block);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..block {
                for j in 0..block {
                    let oc = c * block * block + i * block + j;
                    for y in 0..out_shape.h {
                        for x in 0..out_shape.w {
                            *out.at_mut(n, oc, y, x) = input.at(n, c, block * y + i, block * x + j);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mean over the spatial dims, output (n, c, 1, 1).
pub fn global_avg_pool(input: &Tensor) -> Tensor {
    let s = input.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    let inv = 1.0 / (s.h * s.w) as f32;
    for n in 0..s.n {
        for c in 0..s.c {
            let mut sum = 0.0f32;
            for &v in input.plane(n, c) {
                sum += v;
            }
            *out.at_mut(n, c, 0, 0) = sum * inv;
        }
    }
    out
}

/// Mean pooling over k×k windows, no padding.
pub fn avg_pool2d(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor, TensorError> {
    let op = "avg_pool2d";
    if kernel == 0 || stride == 0 {
        return Err(TensorError::arg(op, "kernel and stride must be ≥ 1"));
    }
    let s = input.shape();
    let oh = out_dim(op, "height", s.h, 0, kernel, stride)?;
    let ow = out_dim(op, "width", s.w, 0, kernel, stride)?;
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let inv = 1.0 / (kernel * kernel) as f32;
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = input.plane(n, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut sum = 0.0f32;
                    for ky in 0..kernel {
                        let row = &plane[(oy * stride + ky) * s.w..];
                        for kx in 0..kernel {
                            sum += row[ox * stride + kx];
                        }
                    }
                    *out.at_mut(n, c, oy, ox) = sum * inv;
                }
            }
        }
    }
    Ok(out)
}

/// 2× nearest-neighbour upsampling.
pub fn nearest_upsample2(input: &Tensor) -> Tensor {
    let s = input.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, s.h * 2, s.w * 2));
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..s.h {
                for x in 0..s.w {
                    let v = input.at(n, c, y, x);
                    *out.at_mut(n, c, 2 * y, 2 * x) = v;
                    *out.at_mut(n, c, 2 * y, 2 * x + 1) = v;
                    *out.at_mut(n, c, 2 * y + 1, 2 * x) = v;
                    *out.at_mut(n, c, 2 * y + 1, 2 * x + 1) = v;
                }
            }
        }
    }
    out
}

/// Affine map on per-sample channel vectors: input (n, c, 1, 1), weight
/// (m, c, 1, 1), bias (1, m, 1, 1); output (n, m, 1, 1).
pub fn dense(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, TensorError> {
    let op = "dense";
    let s = input.shape();
    let ws = weight.shape();
    if s.h != 1 || s.w != 1 {
        return Err(TensorError::shape(op, "input spatial dims", "1x1", format!("{}x{}", s.h, s.w)));
    }
    if ws.c != s.c || ws.h != 1 || ws.w != 1 {
        return Err(TensorError::shape(op, "weight", Shape::new(ws.n, s.c, 1, 1), ws));
    }
    if let Some(b) = bias {
        if b.shape() != Shape::new(1, ws.n, 1, 1) {
            return Err(TensorError::shape(op, "bias", Shape::new(1, ws.n, 1, 1), b.shape()));
        }
    }
    let mut out = Tensor::zeros(Shape::new(s.n, ws.n, 1, 1));
    for n in 0..s.n {
        let x = input.plane_window(n);
        for o in 0..ws.n {
            let w_row = &weight.data()[o * ws.c..(o + 1) * ws.c];
            let mut acc = 0.0f32;
            for (wv, &xv) in w_row.iter().zip(x) {
                acc += wv * xv;
            }
            if let Some(b) = bias {
                acc += b.data()[o];
            }
            *out.at_mut(n, o, 0, 0) = acc;
        }
    }
    Ok(out)
}

/// Clamp to [0, 1], then apply `v^(1/gamma)`.
pub fn gamma_correct(input: &Tensor, gamma: f32) -> Result<Tensor, TensorError> {
    if !(gamma > 0.0) {
        return Err(TensorError::arg("gamma_correct", format!("gamma must be > 0, got {gamma}")));
    }
    let e = 1.0 / gamma;
    Ok(input.map(|v| v.clamp(0.0, 1.0).powf(e)))
}

/// Global Reinhard-style tone curve with a white point:
/// out = v·(1 + v/white²)/(1 + v). Negative inputs are treated as 0.
pub fn tone_map(input: &Tensor, white: f32) -> Result<Tensor, TensorError> {
    if !(white > 0.0) {
        return Err(TensorError::arg("tone_map", format!("white must be > 0, got {white}")));
    }
    let inv_w2 = 1.0 / (white * white);
    Ok(input.map(|v| {
        let v = v.max(0.0);
        v * (1.0 + v * inv_w2) / (1.0 + v)
    }))
}

impl Tensor {
    /// Channel vector of one sample for (n, c, 1, 1) tensors.
    fn plane_window(&self, n: usize) -> &[f32] {
        let c = self.shape().c;
        &self.data()[n * c..(n + 1) * c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_basics() {
        let t = Tensor::new(Shape::new(1, 1, 1, 3), vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(sigmoid(&t).data()[1], 0.5);
        assert_eq!(tanh(&t).data()[1], 0.0);
    }

    #[test]
    fn depth_to_space_definitional() {
        let t = Tensor::new(Shape::new(1, 4, 1, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = depth_to_space(&t, 2).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn depth_to_space_block_one_is_identity() {
        let t = Tensor::new(Shape::new(1, 3, 2, 2), (0..12).map(|v| v as f32).collect()).unwrap();
        assert!(depth_to_space(&t, 1).unwrap().bits_eq(&t));
    }

    #[test]
    fn depth_to_space_rejects_bad_channels() {
        let t = Tensor::zeros(Shape::new(1, 3, 2, 2));
        assert!(depth_to_space(&t, 2).is_err());
    }

    #[test]
    fn space_depth_roundtrip_bits() {
        let mut rng = crate::tests::rng(3);
        let t = Tensor::random_uniform(Shape::new(2, 8, 6, 4), &mut rng);
        let rt = depth_to_space(&space_to_depth(&t, 2).unwrap(), 2).unwrap();
        assert!(rt.bits_eq(&t));
    }

    #[test]
    fn gap_means() {
        let t = Tensor::new(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&t).data(), &[2.5]);
        let k = Tensor::filled(Shape::new(2, 3, 5, 7), 0.25);
        assert!(global_avg_pool(&k).data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn dense_identity_and_bias() {
        let x = Tensor::new(Shape::new(1, 3, 1, 1), vec![1.0, 2.0, 3.0]).unwrap();
        let eye = Tensor::from_fn(Shape::new(3, 3, 1, 1), |o, i, _, _| if o == i { 1.0 } else { 0.0 });
        assert_eq!(dense(&x, &eye, None).unwrap().data(), x.data());
        let zero = Tensor::zeros(Shape::new(3, 3, 1, 1));
        let b = Tensor::new(Shape::new(1, 3, 1, 1), vec![5.0, 6.0, 7.0]).unwrap();
        assert_eq!(dense(&x, &zero, Some(&b)).unwrap().data(), b.data());
    }

    #[test]
    fn gamma_fixed_points_and_analytic() {
        let t = Tensor::new(Shape::new(1, 1, 1, 3), vec![0.0, 0.25, 1.0]).unwrap();
        let g1 = gamma_correct(&t, 1.0).unwrap();
        assert_eq!(g1.data(), t.data());
        let g2 = gamma_correct(&t, 2.0).unwrap();
        assert!((g2.data()[1] - 0.5).abs() < 1e-7);
        assert_eq!(g2.data()[0], 0.0);
        assert_eq!(g2.data()[2], 1.0);
        assert!(gamma_correct(&t, 0.0).is_err());
    }

    #[test]
    fn tone_map_zero_white_point_and_monotone() {
        let t = Tensor::new(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]).unwrap();
        let out = tone_map(&t, 1.0).unwrap();
        assert_eq!(out.data()[0], 0.0);
        assert!((out.data()[1] - 1.0).abs() < 1e-7);
        // monotone on a sampled grid
        let grid = Tensor::from_fn(Shape::new(1, 1, 1, 64), |_, _, _, x| x as f32 * 0.05);
        let mapped = tone_map(&grid, 2.5).unwrap();
        for pair in mapped.data().windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        assert!(tone_map(&t, 0.0).is_err());
    }

    #[test]
    fn concat_slice_roundtrip() {
        let mut rng = crate::tests::rng(11);
        let a = Tensor::random_uniform(Shape::new(1, 2, 3, 3), &mut rng);
        let b = Tensor::random_uniform(Shape::new(1, 3, 3, 3), &mut rng);
        let cat = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(cat.shape().c, 5);
        assert!(slice_channels(&cat, 0, 2).unwrap().bits_eq(&a));
        assert!(slice_channels(&cat, 2, 5).unwrap().bits_eq(&b));
    }

    #[test]
    fn avg_pool_basics() {
        let t = Tensor::new(
            Shape::new(1, 1, 2, 4),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        )
        .unwrap();
        let out = avg_pool2d(&t, 2, 2).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 1, 2));
        assert_eq!(out.data(), &[3.5, 5.5]);
    }

    #[test]
    fn upsample_replicates() {
        let t = Tensor::new(Shape::new(1, 1, 1, 2), vec![1.0, 2.0]).unwrap();
        let out = nearest_upsample2(&t);
        assert_eq!(out.shape(), Shape::new(1, 1, 2, 4));
        assert_eq!(out.data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
