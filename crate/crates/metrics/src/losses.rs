use ispforge_tensor::{fixed_filter, FilterKind, Tensor};

use crate::{check_shapes, MetricError};

pub fn l1(pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
    check_shapes("l1", pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (*p as f64 - *t as f64).abs())
        .sum();
    Ok(sum / pred.data().len() as f64)
}

pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
    check_shapes("mse", pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = *p as f64 - *t as f64;
            d * d
        })
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// Smooth L1 surrogate: mean √(d² + ε²). Equals ε on identical inputs.
pub fn charbonnier(pred: &Tensor, target: &Tensor, eps: f64) -> Result<f64, MetricError> {
    check_shapes("charbonnier", pred, target)?;
    if !(eps > 0.0) {
        return Err(MetricError::arg("charbonnier", format!("ε must be > 0, got {eps}")));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = *p as f64 - *t as f64;
            (d * d + eps * eps).sqrt()
        })
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// Mean over pixels of 1 − cos(pred, target) on RGB vectors. The ε
/// stabilizer sits in both numerator and denominator so identical inputs
/// (including zero vectors) score exactly 0.
pub fn cosine_loss(pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
    check_shapes("cosine", pred, target)?;
    let s = pred.shape();
    if s.c != 3 {
        return Err(MetricError::arg("cosine", format!("needs 3 channels, got {}", s.c)));
    }
    const EPS: f64 = 1e-8;
    let mut total = 0.0f64;
    for n in 0..s.n {
        for y in 0..s.h {
            for x in 0..s.w {
                let mut dot = 0.0f64;
                let mut np = 0.0f64;
                let mut nt = 0.0f64;
                for c in 0..3 {
                    let p = pred.at(n, c, y, x) as f64;
                    let t = target.at(n, c, y, x) as f64;
                    dot += p * t;
                    np += p * p;
                    nt += t * t;
                }
                // single sqrt of the norm product: for identical inputs
                // dot == np == nt bitwise and sqrt(x·x) == x, so the ratio
                // is exactly 1 and the loss exactly 0
                let sim = (dot + EPS) / ((np * nt).sqrt() + EPS);
                total += (1.0 - sim).max(0.0);
            }
        }
    }
    Ok(total / (s.n * s.h * s.w) as f64)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PatchMode {
    /// Weights exp(1/(|m|+ε) + 1/(v+ε)): emphasizes patches with *small*
    /// mean/variance error. Exponent clamped at 80 so the weight stays
    /// finite.
    Literal,
    /// Weights exp(|m| + v): emphasizes patches with *large* error, matching
    /// the stated motivation. Default.
    Rectified,
}

/// Patch-weighted L1: tile each channel plane into p×p patches, weight every
/// pixel's |d| by a per-patch factor derived from the mean and variance of
/// the patch difference, and normalize by the mean weight so the scale stays
/// comparable to plain L1.
pub fn patch_loss(
    pred: &Tensor,
    target: &Tensor,
    patch: usize,
    eps: f64,
    mode: PatchMode,
) -> Result<f64, MetricError> {
    Ok(patch_loss_detail(pred, target, patch, eps, mode)?.1)
}

/// As [`patch_loss`], also returning the pre-normalization patch weights in
/// (n, c, patch-row, patch-col) order.
pub fn patch_loss_detail(
    pred: &Tensor,
    target: &Tensor,
    patch: usize,
    eps: f64,
    mode: PatchMode,
) -> Result<(Vec<f64>, f64), MetricError> {
    check_shapes("patch_loss", pred, target)?;
    if !(eps > 0.0) {
        return Err(MetricError::arg("patch_loss", format!("ε must be > 0, got {eps}")));
    }
    let s = pred.shape();
    if patch == 0 || s.h % patch != 0 || s.w % patch != 0 {
        return Err(MetricError::arg(
            "patch_loss",
            format!("dims {}x{} not divisible by patch {patch}", s.h, s.w),
        ));
    }
    let (py, px) = (s.h / patch, s.w / patch);
    let mut weights = Vec::with_capacity(s.n * s.c * py * px);
    let mut weighted_abs = 0.0f64;

    for n in 0..s.n {
        for c in 0..s.c {
            for ty in 0..py {
                for tx in 0..px {
                    let mut sum = 0.0f64;
                    let mut sum_sq = 0.0f64;
                    let mut abs = 0.0f64;
                    for y in ty * patch..(ty + 1) * patch {
                        for x in tx * patch..(tx + 1) * patch {
                            let d = pred.at(n, c, y, x) as f64 - target.at(n, c, y, x) as f64;
                            sum += d;
                            sum_sq += d * d;
                            abs += d.abs();
                        }
                    }
                    let count = (patch * patch) as f64;
                    let mean = sum / count;
                    let var = (sum_sq / count - mean * mean).max(0.0);
                    let arg = match mode {
                        PatchMode::Literal => {
                            (1.0 / (mean.abs() + eps) + 1.0 / (var + eps)).min(80.0)
                        }
                        PatchMode::Rectified => mean.abs() + var,
                    };
                    let w = arg.exp();
                    weights.push(w);
                    weighted_abs += w * abs;
                }
            }
        }
    }

    let mean_weight = weights.iter().sum::<f64>() / weights.len() as f64;
    let n_pixels = s.count() as f64;
    let loss = weighted_abs / (n_pixels * mean_weight);
    Ok((weights, loss))
}

/// Soft-histogram color distribution distance: per channel, a Gaussian-kernel
/// histogram over [0, 1] normalized to sum 1; loss is the L1 distance summed
/// over channels.
pub fn histogram_loss(
    pred: &Tensor,
    target: &Tensor,
    bins: usize,
    sigma: Option<f64>,
) -> Result<f64, MetricError> {
    check_shapes("histogram_loss", pred, target)?;
    if bins < 2 {
        return Err(MetricError::arg("histogram_loss", format!("bins must be ≥ 2, got {bins}")));
    }
    let bin_width = 1.0 / (bins - 1) as f64;
    let sigma = sigma.unwrap_or(bin_width);
    if !(sigma > 0.0) {
        return Err(MetricError::arg("histogram_loss", format!("σ must be > 0, got {sigma}")));
    }
    let s = pred.shape();
    let mut total = 0.0f64;
    for c in 0..s.c {
        let hp = soft_histogram(pred, c, bins, bin_width, sigma);
        let ht = soft_histogram(target, c, bins, bin_width, sigma);
        total += hp
            .iter()
            .zip(&ht)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    }
    Ok(total)
}

/// Normalized per-channel soft histogram; exposed so tests can check the
/// normalization contract directly.
pub(crate) fn soft_histogram(
    t: &Tensor,
    channel: usize,
    bins: usize,
    bin_width: f64,
    sigma: f64,
) -> Vec<f64> {
    let s = t.shape();
    let mut hist = vec![0.0f64; bins];
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    for n in 0..s.n {
        for &v in t.plane(n, channel) {
            let v = v as f64;
            for (b, h) in hist.iter_mut().enumerate() {
                let mu = b as f64 * bin_width;
                let d = v - mu;
                *h += (-d * d * inv_two_sigma_sq).exp();
            }
        }
    }
    let sum: f64 = hist.iter().sum();
    if sum > 0.0 {
        for h in &mut hist {
            *h /= sum;
        }
    }
    hist
}

/// L1 between Sobel gradient magnitudes. The Sobel maps use zero padding, so
/// the comparison is restricted to the interior (1-px border dropped) where
/// constant images are genuinely edge-free.
pub fn edge_loss(pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
    check_shapes("edge_loss", pred, target)?;
    let s = pred.shape();
    if s.h < 3 || s.w < 3 {
        return Err(MetricError::arg("edge_loss", format!("needs ≥ 3x3 images, got {}x{}", s.h, s.w)));
    }
    let mag = |t: &Tensor| -> Result<Tensor, MetricError> {
        let gx = fixed_filter(t, FilterKind::SobelX)?;
        let gy = fixed_filter(t, FilterKind::SobelY)?;
        let mut out = gx.clone();
        for (o, (&x, &y)) in out
            .data_mut()
            .iter_mut()
            .zip(gx.data().iter().zip(gy.data()))
        {
            *o = (x * x + y * y + 1e-12).sqrt();
        }
        Ok(out)
    };
    let mp = mag(pred)?;
    let mt = mag(target)?;
    let mut total = 0.0f64;
    let mut count = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 1..s.h - 1 {
                for x in 1..s.w - 1 {
                    total += (mp.at(n, c, y, x) as f64 - mt.at(n, c, y, x) as f64).abs();
                    count += 1;
                }
            }
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ispforge_tensor::Shape;

    fn pair(delta: f32) -> (Tensor, Tensor) {
        let target = Tensor::from_fn(Shape::new(1, 3, 8, 8), |_, c, y, x| {
            0.2 + 0.07 * c as f32 + 0.01 * (y as f32) + 0.005 * (x as f32)
        });
        (target.map(|v| v + delta), target)
    }

    #[test]
    fn zero_on_identical_inputs() {
        let (_, t) = pair(0.0);
        assert_eq!(l1(&t, &t).unwrap(), 0.0);
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        assert_eq!(cosine_loss(&t, &t).unwrap(), 0.0);
        assert_eq!(patch_loss(&t, &t, 4, 1e-2, PatchMode::Rectified).unwrap(), 0.0);
        assert_eq!(patch_loss(&t, &t, 4, 1e-2, PatchMode::Literal).unwrap(), 0.0);
        assert_eq!(histogram_loss(&t, &t, 32, None).unwrap(), 0.0);
        assert_eq!(edge_loss(&t, &t).unwrap(), 0.0);
        let ch = charbonnier(&t, &t, 1e-3).unwrap();
        assert!((ch - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn charbonnier_approaches_l1_for_large_diffs() {
        let t = Tensor::zeros(Shape::new(1, 1, 4, 4));
        let p = Tensor::filled(Shape::new(1, 1, 4, 4), 1.0);
        let ch = charbonnier(&p, &t, 1e-3).unwrap();
        assert!((ch - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cosine_orthogonal_and_scale_invariance() {
        let red = Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, c, _, _| if c == 0 { 1.0 } else { 0.0 });
        let green = Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, c, _, _| if c == 1 { 1.0 } else { 0.0 });
        assert!((cosine_loss(&red, &green).unwrap() - 1.0).abs() < 1e-7);

        let (p, t) = pair(0.05);
        let t2 = t.map(|v| v * 2.0);
        let a = cosine_loss(&p, &t).unwrap();
        let b = cosine_loss(&p, &t2).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn patch_weights_match_hand_formula() {
        // two 2x2 patches with constant diffs 0.1 and 0.2
        let target = Tensor::zeros(Shape::new(1, 1, 2, 4));
        let pred = Tensor::from_fn(Shape::new(1, 1, 2, 4), |_, _, _, x| {
            if x < 2 {
                0.1
            } else {
                0.2
            }
        });
        let (weights, loss) =
            patch_loss_detail(&pred, &target, 2, 1e-2, PatchMode::Rectified).unwrap();
        assert_eq!(weights.len(), 2);
        assert!((weights[0] - 0.1f64.exp()).abs() < 1e-6);
        assert!((weights[1] - 0.2f64.exp()).abs() < 1e-6);
        let (w1, w2) = (0.1f64.exp(), 0.2f64.exp());
        let expect = (w1 * 0.1 + w2 * 0.2) / (w1 + w2);
        assert!((loss - expect).abs() < 1e-6, "loss {loss}, want {expect}");
    }

    #[test]
    fn literal_mode_weight_is_finite_and_bounded() {
        let t = Tensor::zeros(Shape::new(1, 1, 4, 4));
        let p = Tensor::filled(Shape::new(1, 1, 4, 4), 1e-6);
        let (weights, loss) = patch_loss_detail(&p, &t, 4, 1e-2, PatchMode::Literal).unwrap();
        assert!(weights[0].is_finite());
        assert!(weights[0] <= 200.0f64.exp());
        assert!(loss.is_finite());
    }

    #[test]
    fn histogram_normalizes_to_one() {
        let (p, _) = pair(0.0);
        for c in 0..3 {
            let h = soft_histogram(&p, c, 32, 1.0 / 31.0, 1.0 / 31.0);
            let sum: f64 = h.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn histogram_of_opposite_extremes_is_near_two_per_channel() {
        let zeros = Tensor::zeros(Shape::new(1, 3, 8, 8));
        let ones = Tensor::filled(Shape::new(1, 3, 8, 8), 1.0);
        let loss = histogram_loss(&zeros, &ones, 32, None).unwrap();
        // direct evaluation: both histograms are fixed vectors
        let hz = soft_histogram(&zeros, 0, 32, 1.0 / 31.0, 1.0 / 31.0);
        let ho = soft_histogram(&ones, 0, 32, 1.0 / 31.0, 1.0 / 31.0);
        let per_channel: f64 = hz.iter().zip(&ho).map(|(a, b)| (a - b).abs()).sum();
        assert!((loss - 3.0 * per_channel).abs() < 1e-9);
        assert!(per_channel > 1.8 && per_channel <= 2.0 + 1e-12, "got {per_channel}");
    }

    #[test]
    fn edge_loss_ignores_flat_luminance_shifts() {
        let a = Tensor::filled(Shape::new(1, 1, 8, 8), 0.2);
        let b = Tensor::filled(Shape::new(1, 1, 8, 8), 0.9);
        assert!(edge_loss(&a, &b).unwrap() < 1e-7);
    }
}
