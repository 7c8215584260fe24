//! Single-scale SSIM: 11×11 Gaussian window (σ = 1.5), C1 = 0.01²,
//! C2 = 0.03² for unit dynamic range, symmetric reflection at the borders,
//! mean over pixels and channels.

use ispforge_tensor::Tensor;

use crate::{check_shapes, MetricError};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0f64; WINDOW];
    let center = (WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - center;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mirror an out-of-range index back into [0, n): -1 → 0, n → n-1.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -1 - i;
    }
    if i >= n {
        i = 2 * n - 1 - i;
    }
    i as usize
}

/// Separable Gaussian filter with reflection padding, f64 accumulation.
fn blur(plane: &[f64], h: usize, w: usize, window: &[f64; WINDOW]) -> Vec<f64> {
    let r = WINDOW / 2;
    let mut tmp = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &g) in window.iter().enumerate() {
                let ix = reflect(x as isize + k as isize - r as isize, w);
                acc += g * plane[y * w + ix];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &g) in window.iter().enumerate() {
                let iy = reflect(y as isize + k as isize - r as isize, h);
                acc += g * tmp[iy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn ssim(pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
    check_shapes("ssim", pred, target)?;
    let s = pred.shape();
    if s.h < WINDOW || s.w < WINDOW {
        return Err(MetricError::arg(
            "ssim",
            format!("spatial dims must be ≥ {WINDOW}, got {}x{}", s.h, s.w),
        ));
    }
    let window = gaussian_window();
    let (h, w) = (s.h, s.w);
    let mut total = 0.0f64;
    let mut count = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            let x: Vec<f64> = pred.plane(n, c).iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = target.plane(n, c).iter().map(|&v| v as f64).collect();
            let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();

            let mu_x = blur(&x, h, w, &window);
            let mu_y = blur(&y, h, w, &window);
            let m_xx = blur(&xx, h, w, &window);
            let m_yy = blur(&yy, h, w, &window);
            let m_xy = blur(&xy, h, w, &window);

            for i in 0..h * w {
                let var_x = m_xx[i] - mu_x[i] * mu_x[i];
                let var_y = m_yy[i] - mu_y[i] * mu_y[i];
                let cov = m_xy[i] - mu_x[i] * mu_y[i];
                let num = (2.0 * mu_x[i] * mu_y[i] + C1) * (2.0 * cov + C2);
                let den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + C1) * (var_x + var_y + C2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}
