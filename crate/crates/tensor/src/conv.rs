use std::fmt;

use crate::error::TensorError;
use crate::tensor::{Shape, Tensor};

/// Zero padding, one count per border. Even kernels get the asymmetric
/// "same" split: left/top = k/2 − 1, right/bottom = k/2.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Pad {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Pad {
    pub const ZERO: Pad = Pad {
        top: 0,
        bottom: 0,
        left: 0,
        right: 0,
    };

    pub fn uniform(p: usize) -> Self {
        Pad {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }

    /// "Same" padding for a (kh, kw) kernel at stride 1.
    pub fn same(kh: usize, kw: usize) -> Self {
        let (top, bottom) = Self::same_axis(kh);
        let (left, right) = Self::same_axis(kw);
        Pad {
            top,
            bottom,
            left,
            right,
        }
    }

    fn same_axis(k: usize) -> (usize, usize) {
        if k % 2 == 1 {
            ((k - 1) / 2, (k - 1) / 2)
        } else {
            (k / 2 - 1, k / 2)
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Pad::ZERO
    }
}

impl fmt::Display for Pad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.top, self.bottom, self.left, self.right)
    }
}

/// A single 2-D convolution: weight layout (out, in/groups, kh, kw),
/// optional bias of length `out_channels`.
#[derive(Clone, PartialEq, Debug)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub pad: Pad,
    pub groups: usize,
    pub weight: Tensor,
    pub bias: Option<Vec<f32>>,
}

impl ConvSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: Pad,
        groups: usize,
        weight: Tensor,
        bias: Option<Vec<f32>>,
    ) -> Result<Self, TensorError> {
        let spec = ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            groups,
            weight,
            bias,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Stride-1 dense conv with "same" padding.
    pub fn same_padded(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        weight: Tensor,
        bias: Option<Vec<f32>>,
    ) -> Result<Self, TensorError> {
        ConvSpec::new(
            in_channels,
            out_channels,
            kernel,
            1,
            Pad::same(kernel.0, kernel.1),
            1,
            weight,
            bias,
        )
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let op = "conv2d";
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return Err(TensorError::arg(
                op,
                format!(
                    "channels ({} in, {} out) must divide groups ({})",
                    self.in_channels, self.out_channels, self.groups
                ),
            ));
        }
        if self.stride == 0 {
            return Err(TensorError::arg(op, "stride must be ≥ 1"));
        }
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(TensorError::arg(op, "kernel dims must be ≥ 1"));
        }
        let want = Shape::new(
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel.0,
            self.kernel.1,
        );
        if self.weight.shape() != want {
            return Err(TensorError::shape(op, "weight", want, self.weight.shape()));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_channels {
                return Err(TensorError::shape(
                    op,
                    "bias length",
                    self.out_channels,
                    b.len(),
                ));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weight.shape().count() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    pub fn out_spatial(&self, h: usize, w: usize) -> Result<(usize, usize), TensorError> {
        let oh = out_dim(
            "conv2d",
            "height",
            h,
            self.pad.top + self.pad.bottom,
            self.kernel.0,
            self.stride,
        )?;
        let ow = out_dim(
            "conv2d",
            "width",
            w,
            self.pad.left + self.pad.right,
            self.kernel.1,
            self.stride,
        )?;
        Ok((oh, ow))
    }
}

pub(crate) fn out_dim(
    op: &'static str,
    dimension: &'static str,
    size: usize,
    pad: usize,
    kernel: usize,
    stride: usize,
) -> Result<usize, TensorError> {
    if size + pad < kernel {
        return Err(TensorError::shape(
            op,
            dimension,
            format!("≥ {}", kernel.saturating_sub(pad)),
            size,
        ));
    }
    Ok((size + pad - kernel) / stride + 1)
}

/// Direct convolution over zero-padded input.
///
/// The reduction for each output element runs channel-major, then kernel row,
/// then kernel column, with the bias added last; this order is part of the
/// contract so outputs are bit-reproducible and independent of the optional
/// channel-parallel mode.
pub fn conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor, TensorError> {
    spec.validate()?;
    let s = input.shape();
    if s.c != spec.in_channels {
        return Err(TensorError::shape(
            "conv2d",
            "input channels",
            spec.in_channels,
            s.c,
        ));
    }
    let (oh, ow) = spec.out_spatial(s.h, s.w)?;
    let out_shape = Shape::new(s.n, spec.out_channels, oh, ow);
    let mut out = vec![0.0f32; out_shape.count()];

    let threads = crate::threads().min(spec.out_channels);
    let plane = oh * ow;
    let oc = spec.out_channels;
    for (ni, img) in out.chunks_mut(oc * plane).enumerate() {
        if threads <= 1 {
            conv_image_oc_range(input, spec, ni, oh, ow, 0, oc, img);
        } else {
            let per = oc.div_ceil(threads);
            std::thread::scope(|scope| {
                let mut rest = img;
                let mut oc0 = 0;
                while oc0 < oc {
                    let take = per.min(oc - oc0);
                    let (chunk, tail) = rest.split_at_mut(take * plane);
                    let start = oc0;
                    scope.spawn(move || {
                        conv_image_oc_range(input, spec, ni, oh, ow, start, start + take, chunk);
                    });
                    rest = tail;
                    oc0 += take;
                }
            });
        }
    }

    Tensor::new(out_shape, out)
}

/// Compute output channels [oc_from, oc_to) of one batch image into `out`,
/// which holds those planes contiguously.
#[allow(clippy::too_many_arguments)]
fn conv_image_oc_range(
    input: &Tensor,
    spec: &ConvSpec,
    ni: usize,
    oh: usize,
    ow: usize,
    oc_from: usize,
    oc_to: usize,
    out: &mut [f32],
) {
    let (kh, kw) = spec.kernel;
    let icg = spec.in_channels / spec.groups;
    let ocg = spec.out_channels / spec.groups;
    let k_len = icg * kh * kw;
    let wdata = spec.weight.data();

    let mut col = vec![0.0f32; k_len * ow];
    let mut acc = vec![0.0f32; ow];
    let plane = oh * ow;

    for oy in 0..oh {
        let mut col_group = usize::MAX;
        for oc in oc_from..oc_to {
            let g = oc / ocg;
            if g != col_group {
                build_col_row(input, spec, ni, g, oy, ow, &mut col);
                col_group = g;
            }
            let w_row = &wdata[oc * k_len..(oc + 1) * k_len];
            let b = spec.bias.as_ref().map_or(0.0, |b| b[oc]);
            acc.fill(0.0);
            for (k, &wv) in w_row.iter().enumerate() {
                let row = &col[k * ow..(k + 1) * ow];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += wv * v;
                }
            }
            let out_row = &mut out[(oc - oc_from) * plane + oy * ow..][..ow];
            for (o, &a) in out_row.iter_mut().zip(&acc) {
                *o = a + b;
            }
        }
    }
}

/// Gather the zero-padded input patches feeding output row `oy` into a
/// (icg·kh·kw) × ow matrix; k is ordered (channel, kernel row, kernel col).
fn build_col_row(
    input: &Tensor,
    spec: &ConvSpec,
    ni: usize,
    group: usize,
    oy: usize,
    ow: usize,
    col: &mut [f32],
) {
    let s = input.shape();
    let (kh, kw) = spec.kernel;
    let icg = spec.in_channels / spec.groups;
    let stride = spec.stride;
    let pt = spec.pad.top as isize;
    let pl = spec.pad.left as isize;

    let mut k = 0;
    for ic_local in 0..icg {
        let ic = group * icg + ic_local;
        let in_plane = input.plane(ni, ic);
        for kr in 0..kh {
            let iy = (oy * stride + kr) as isize - pt;
            if iy < 0 || iy >= s.h as isize {
                col[k * ow..(k + kw) * ow].fill(0.0);
                k += kw;
                continue;
            }
            let in_row = &in_plane[iy as usize * s.w..(iy as usize + 1) * s.w];
            for kc in 0..kw {
                let dst = &mut col[(k + kc) * ow..(k + kc + 1) * ow];
                for (ox, d) in dst.iter_mut().enumerate() {
                    let ix = (ox * stride + kc) as isize - pl;
                    *d = if ix >= 0 && (ix as usize) < s.w {
                        in_row[ix as usize]
                    } else {
                        0.0
                    };
                }
            }
            k += kw;
        }
    }
}

/// 2× transposed convolution ("deconvolution"): kernel 2×2, stride 2, weight
/// layout (out, in, 2, 2). Each input pixel scatters to one 2×2 output block.
pub fn transpose_conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
) -> Result<Tensor, TensorError> {
    let op = "transpose_conv2d";
    let s = input.shape();
    let ws = weight.shape();
    if ws.h != 2 || ws.w != 2 {
        return Err(TensorError::arg(
            op,
            format!("kernel must be 2x2, got {}x{}", ws.h, ws.w),
        ));
    }
    if ws.c != s.c {
        return Err(TensorError::shape(op, "input channels", ws.c, s.c));
    }
    if let Some(b) = bias {
        if b.len() != ws.n {
            return Err(TensorError::shape(op, "bias length", ws.n, b.len()));
        }
    }
    let out_c = ws.n;
    let out_shape = Shape::new(s.n, out_c, s.h * 2, s.w * 2);
    let mut out = Tensor::zeros(out_shape);
    for ni in 0..s.n {
        for oc in 0..out_c {
            let b = bias.map_or(0.0, |b| b[oc]);
            for oy in 0..out_shape.h {
                let (iy, ky) = (oy / 2, oy % 2);
                for ox in 0..out_shape.w {
                    let (ix, kx) = (ox / 2, ox % 2);
                    let mut acc = 0.0f32;
                    for ic in 0..s.c {
                        acc += weight.at(oc, ic, ky, kx) * input.at(ni, ic, iy, ix);
                    }
                    *out.at_mut(ni, oc, oy, ox) = acc + b;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: (usize, usize, usize, usize), data: Vec<f32>) -> Tensor {
        Tensor::new(Shape::new(shape.0, shape.1, shape.2, shape.3), data).unwrap()
    }

    #[test]
    fn identity_1x1_kernel_is_exact_identity() {
        let input = t((1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]);
        let spec = ConvSpec::new(
            1,
            1,
            (1, 1),
            1,
            Pad::ZERO,
            1,
            t((1, 1, 1, 1), vec![1.0]),
            Some(vec![0.0]),
        )
        .unwrap();
        let out = conv2d(&input, &spec).unwrap();
        assert!(out.bits_eq(&input));
    }

    #[test]
    fn all_ones_3x3_padded() {
        let input = Tensor::filled(Shape::new(1, 1, 3, 3), 1.0);
        let spec = ConvSpec::new(
            1,
            1,
            (3, 3),
            1,
            Pad::uniform(1),
            1,
            Tensor::filled(Shape::new(1, 1, 3, 3), 1.0),
            None,
        )
        .unwrap();
        let out = conv2d(&input, &spec).unwrap();
        // center sees all 9 taps, corners 4, edges 6
        assert_eq!(out.at(0, 0, 1, 1), 9.0);
        assert_eq!(out.at(0, 0, 0, 0), 4.0);
        assert_eq!(out.at(0, 0, 0, 1), 6.0);
        assert_eq!(out.at(0, 0, 2, 2), 4.0);
        assert_eq!(out.at(0, 0, 1, 2), 6.0);
    }

    #[test]
    fn depthwise_groups_scale_channels() {
        let input = Tensor::filled(Shape::new(1, 2, 2, 2), 1.0);
        let spec = ConvSpec::new(
            2,
            2,
            (1, 1),
            1,
            Pad::ZERO,
            2,
            t((2, 1, 1, 1), vec![2.0, 3.0]),
            None,
        )
        .unwrap();
        let out = conv2d(&input, &spec).unwrap();
        assert_eq!(out.plane(0, 0), &[2.0; 4]);
        assert_eq!(out.plane(0, 1), &[3.0; 4]);
    }

    #[test]
    fn shape_error_names_dimension() {
        let input = Tensor::zeros(Shape::new(1, 3, 4, 4));
        let spec = ConvSpec::new(
            2,
            1,
            (1, 1),
            1,
            Pad::ZERO,
            1,
            Tensor::zeros(Shape::new(1, 2, 1, 1)),
            None,
        )
        .unwrap();
        let err = conv2d(&input, &spec).unwrap_err().to_string();
        assert!(err.contains("input channels"), "{err}");
        assert!(err.contains('2') && err.contains('3'), "{err}");
    }

    #[test]
    fn even_kernel_same_pad_keeps_size() {
        let input = Tensor::filled(Shape::new(1, 1, 4, 4), 1.0);
        let spec = ConvSpec::same_padded(
            1,
            1,
            (2, 2),
            Tensor::filled(Shape::new(1, 1, 2, 2), 1.0),
            None,
        )
        .unwrap();
        assert_eq!(
            spec.pad,
            Pad {
                top: 0,
                bottom: 1,
                left: 0,
                right: 1
            }
        );
        let out = conv2d(&input, &spec).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 4, 4));
        assert_eq!(out.at(0, 0, 0, 0), 4.0);
        // bottom-right corner only sees the top-left tap
        assert_eq!(out.at(0, 0, 3, 3), 1.0);
    }

    #[test]
    fn stride_two_output_dims() {
        let input = Tensor::zeros(Shape::new(1, 4, 256, 256));
        let spec = ConvSpec::new(
            4,
            8,
            (3, 3),
            2,
            Pad::uniform(1),
            1,
            Tensor::zeros(Shape::new(8, 4, 3, 3)),
            None,
        )
        .unwrap();
        let out = conv2d(&input, &spec).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 8, 128, 128));
    }

    #[test]
    fn parallel_matches_serial_bitwise() {
        let mut rng = crate::tests::rng(7);
        let input = Tensor::random_uniform(Shape::new(2, 3, 13, 17), &mut rng);
        let spec = ConvSpec::new(
            3,
            5,
            (3, 3),
            1,
            Pad::uniform(1),
            1,
            Tensor::random_uniform(Shape::new(5, 3, 3, 3), &mut rng),
            Some(vec![0.1, 0.2, 0.3, 0.4, 0.5]),
        )
        .unwrap();
        let serial = conv2d(&input, &spec).unwrap();
        crate::set_threads(4);
        let parallel = conv2d(&input, &spec).unwrap();
        crate::set_threads(1);
        assert!(serial.bits_eq(&parallel));
    }

    #[test]
    fn transpose_conv_scatters_blocks() {
        let input = t((1, 1, 1, 2), vec![1.0, 2.0]);
        let weight = t((1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]);
        let out = transpose_conv2d(&input, &weight, None).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 2, 4));
        assert_eq!(out.data(), &[1.0, 2.0, 2.0, 4.0, 3.0, 4.0, 6.0, 8.0]);
    }
}
