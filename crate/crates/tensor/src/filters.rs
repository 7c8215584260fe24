//! Fixed, non-learnable 3×3 depthwise filters (Gauss and Sobel), zero pad 1.

use std::fmt;

use crate::conv::{conv2d, ConvSpec, Pad};
use crate::error::TensorError;
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FilterKind {
    Gauss,
    SobelX,
    SobelY,
}

impl FilterKind {
    pub fn kernel(self) -> [f32; 9] {
        match self {
            // normalized binomial blur, sums to 1
            FilterKind::Gauss => {
                let k = 1.0 / 16.0;
                [
                    1.0 * k, 2.0 * k, 1.0 * k, //
                    2.0 * k, 4.0 * k, 2.0 * k, //
                    1.0 * k, 2.0 * k, 1.0 * k,
                ]
            }
            FilterKind::SobelX => [
                -1.0, 0.0, 1.0, //
                -2.0, 0.0, 2.0, //
                -1.0, 0.0, 1.0,
            ],
            FilterKind::SobelY => [
                -1.0, -2.0, -1.0, //
                0.0, 0.0, 0.0, //
                1.0, 2.0, 1.0,
            ],
        }
    }

    pub fn parse(s: &str) -> Result<Self, TensorError> {
        match s {
            "gauss" => Ok(FilterKind::Gauss),
            "sobel_x" => Ok(FilterKind::SobelX),
            "sobel_y" => Ok(FilterKind::SobelY),
            other => Err(TensorError::arg(
                "fixed_filter",
                format!("unknown filter kind '{other}'"),
            )),
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Gauss => "gauss",
            FilterKind::SobelX => "sobel_x",
            FilterKind::SobelY => "sobel_y",
        })
    }
}

/// Depthwise 3×3 convolution with one of the fixed kernels, zero pad 1.
pub fn fixed_filter(input: &Tensor, kind: FilterKind) -> Result<Tensor, TensorError> {
    let c = input.shape().c;
    let kernel = kind.kernel();
    let mut wdata = Vec::with_capacity(c * 9);
    for _ in 0..c {
        wdata.extend_from_slice(&kernel);
    }
    let weight = Tensor::new(Shape::new(c, 1, 3, 3), wdata)?;
    let spec = ConvSpec::new(c, c, (3, 3), 1, Pad::uniform(1), c, weight, None)?;
    conv2d(input, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior(t: &Tensor) -> Vec<f32> {
        let s = t.shape();
        let mut out = Vec::new();
        for n in 0..s.n {
            for c in 0..s.c {
                for y in 1..s.h - 1 {
                    for x in 1..s.w - 1 {
                        out.push(t.at(n, c, y, x));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn gauss_preserves_constants_in_interior() {
        let t = Tensor::filled(Shape::new(1, 2, 6, 6), 0.7);
        let out = fixed_filter(&t, FilterKind::Gauss).unwrap();
        for v in interior(&out) {
            assert!((v - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn sobel_zero_on_constants_in_interior() {
        let t = Tensor::filled(Shape::new(1, 1, 6, 6), 0.3);
        for kind in [FilterKind::SobelX, FilterKind::SobelY] {
            let out = fixed_filter(&t, kind).unwrap();
            for v in interior(&out) {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn sobel_x_on_ramp_is_eight_in_interior() {
        let t = Tensor::from_fn(Shape::new(1, 1, 6, 8), |_, _, _, x| x as f32);
        let out = fixed_filter(&t, FilterKind::SobelX).unwrap();
        for v in interior(&out) {
            assert_eq!(v, 8.0);
        }
    }
}
