//! Single-level orthonormal 2-D Haar transform.
//!
//! Per 2×2 block [[a, b], [c, d]] the four half-resolution bands are
//! LL = (a+b+c+d)/2, LH = (a−b+c−d)/2, HL = (a+b−c−d)/2, HH = (a−b−c+d)/2.
//! The 1/2 factor makes the transform orthonormal, so the inverse needs no
//! rescaling and energy is conserved.

use crate::error::TensorError;
use crate::tensor::{Shape, Tensor};

pub fn haar_dwt(input: &Tensor) -> Result<(Tensor, Tensor, Tensor, Tensor), TensorError> {
    let s = input.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(TensorError::arg(
            "haar_dwt",
            format!("spatial dims must be even, got {}x{}", s.h, s.w),
        ));
    }
    let out_shape = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let mut ll = Tensor::zeros(out_shape);
    let mut lh = Tensor::zeros(out_shape);
    let mut hl = Tensor::zeros(out_shape);
    let mut hh = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..out_shape.h {
                for x in 0..out_shape.w {
                    let a = input.at(n, c, 2 * y, 2 * x);
                    let b = input.at(n, c, 2 * y, 2 * x + 1);
                    let cc = input.at(n, c, 2 * y + 1, 2 * x);
                    let d = input.at(n, c, 2 * y + 1, 2 * x + 1);
                    *ll.at_mut(n, c, y, x) = (a + b + cc + d) * 0.5;
                    *lh.at_mut(n, c, y, x) = (a - b + cc - d) * 0.5;
                    *hl.at_mut(n, c, y, x) = (a + b - cc - d) * 0.5;
                    *hh.at_mut(n, c, y, x) = (a - b - cc + d) * 0.5;
                }
            }
        }
    }
    Ok((ll, lh, hl, hh))
}

pub fn haar_idwt(
    ll: &Tensor,
    lh: &Tensor,
    hl: &Tensor,
    hh: &Tensor,
) -> Result<Tensor, TensorError> {
    let s = ll.shape();
    for (name, band) in [("LH", lh), ("HL", hl), ("HH", hh)] {
        if band.shape() != s {
            return Err(TensorError::shape("haar_idwt", name, s, band.shape()));
        }
    }
    let out_shape = Shape::new(s.n, s.c, s.h * 2, s.w * 2);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..s.h {
                for x in 0..s.w {
                    let l = ll.at(n, c, y, x);
                    let dh = lh.at(n, c, y, x);
                    let dv = hl.at(n, c, y, x);
                    let dd = hh.at(n, c, y, x);
                    *out.at_mut(n, c, 2 * y, 2 * x) = (l + dh + dv + dd) * 0.5;
                    *out.at_mut(n, c, 2 * y, 2 * x + 1) = (l - dh + dv - dd) * 0.5;
                    *out.at_mut(n, c, 2 * y + 1, 2 * x) = (l + dh - dv - dd) * 0.5;
                    *out.at_mut(n, c, 2 * y + 1, 2 * x + 1) = (l - dh - dv + dd) * 0.5;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_block() {
        let t = Tensor::filled(Shape::new(1, 1, 2, 2), 1.0);
        let (ll, lh, hl, hh) = haar_dwt(&t).unwrap();
        assert_eq!(ll.data(), &[2.0]);
        assert_eq!(lh.data(), &[0.0]);
        assert_eq!(hl.data(), &[0.0]);
        assert_eq!(hh.data(), &[0.0]);
    }

    #[test]
    fn single_corner_block() {
        let t = Tensor::new(Shape::new(1, 1, 2, 2), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let (ll, lh, hl, hh) = haar_dwt(&t).unwrap();
        for band in [&ll, &lh, &hl, &hh] {
            assert_eq!(band.data(), &[0.5]);
        }
    }

    #[test]
    fn zero_bands_give_zero_image() {
        let z = Tensor::zeros(Shape::new(1, 2, 3, 3));
        let out = haar_idwt(&z, &z, &z, &z).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_dims_rejected() {
        let t = Tensor::zeros(Shape::new(1, 1, 3, 4));
        assert!(haar_dwt(&t).is_err());
    }

    #[test]
    fn band_shape_mismatch_rejected() {
        let a = Tensor::zeros(Shape::new(1, 1, 2, 2));
        let b = Tensor::zeros(Shape::new(1, 1, 2, 3));
        assert!(haar_idwt(&a, &a, &a, &b).is_err());
    }

    #[test]
    fn roundtrip_random() {
        let mut rng = crate::tests::rng(42);
        for _ in 0..10 {
            let t = Tensor::random_uniform(Shape::new(1, 3, 8, 6), &mut rng);
            let (ll, lh, hl, hh) = haar_dwt(&t).unwrap();
            let rt = haar_idwt(&ll, &lh, &hl, &hh).unwrap();
            assert!(rt.max_abs_diff(&t) < 1e-6);
        }
    }

    #[test]
    fn energy_conserved() {
        let mut rng = crate::tests::rng(43);
        let t = Tensor::random_uniform(Shape::new(1, 2, 16, 16), &mut rng);
        let (ll, lh, hl, hh) = haar_dwt(&t).unwrap();
        let e_in: f64 = t.data().iter().map(|&v| (v as f64) * (v as f64)).sum();
        let e_out: f64 = [&ll, &lh, &hl, &hh]
            .iter()
            .flat_map(|b| b.data())
            .map(|&v| (v as f64) * (v as f64))
            .sum();
        assert!((e_in - e_out).abs() / e_in < 1e-4);
    }
}
