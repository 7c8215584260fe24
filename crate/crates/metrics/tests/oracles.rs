//! Every loss term checked against an independent scalar-loop oracle on
//! random 3×32×32 inputs.

use ispforge_metrics::{
    charbonnier, cosine_loss, edge_loss, histogram_loss, l1, mse, patch_loss, psnr, ssim,
    PatchMode,
};
use ispforge_tensor::{Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-5;

fn random_pair(seed: u64) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(1, 3, 32, 32);
    let target = Tensor::random_uniform(shape, &mut rng);
    let noise = Tensor::random_uniform(shape, &mut rng);
    let pred = Tensor::from_fn(shape, |n, c, y, x| {
        (target.at(n, c, y, x) + 0.2 * (noise.at(n, c, y, x) - 0.5)).clamp(0.0, 1.0)
    });
    (pred, target)
}

#[test]
fn l1_mse_psnr_match_loop_oracle() {
    let (p, t) = random_pair(1);
    let n = p.data().len() as f64;
    let mut abs = 0.0f64;
    let mut sq = 0.0f64;
    for i in 0..p.data().len() {
        let d = p.data()[i] as f64 - t.data()[i] as f64;
        abs += d.abs();
        sq += d * d;
    }
    assert!((l1(&p, &t).unwrap() - abs / n).abs() <= TOL);
    assert!((mse(&p, &t).unwrap() - sq / n).abs() <= TOL);
    let expect_psnr = 10.0 * (1.0 / (sq / n)).log10();
    assert!((psnr(&p, &t).unwrap() - expect_psnr).abs() <= 1e-6);
}

#[test]
fn charbonnier_matches_loop_oracle() {
    let (p, t) = random_pair(2);
    let eps = 1e-3;
    let mut sum = 0.0f64;
    for i in 0..p.data().len() {
        let d = p.data()[i] as f64 - t.data()[i] as f64;
        sum += (d * d + eps * eps).sqrt();
    }
    let expect = sum / p.data().len() as f64;
    assert!((charbonnier(&p, &t, eps).unwrap() - expect).abs() <= TOL);
}

#[test]
fn cosine_matches_loop_oracle() {
    let (p, t) = random_pair(3);
    let s = p.shape();
    let mut total = 0.0f64;
    for y in 0..s.h {
        for x in 0..s.w {
            let pv: Vec<f64> = (0..3).map(|c| p.at(0, c, y, x) as f64).collect();
            let tv: Vec<f64> = (0..3).map(|c| t.at(0, c, y, x) as f64).collect();
            let dot: f64 = pv.iter().zip(&tv).map(|(a, b)| a * b).sum();
            let np: f64 = pv.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nt: f64 = tv.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += 1.0 - dot / (np * nt + 1e-8);
        }
    }
    let expect = total / (s.h * s.w) as f64;
    assert!((cosine_loss(&p, &t).unwrap() - expect).abs() <= TOL);
}

#[test]
fn patch_loss_matches_loop_oracle() {
    let (p, t) = random_pair(4);
    for mode in [PatchMode::Rectified, PatchMode::Literal] {
        let got = patch_loss(&p, &t, 8, 1e-2, mode).unwrap();
        let expect = patch_oracle(&p, &t, 8, 1e-2, mode);
        assert!(
            (got - expect).abs() <= TOL,
            "{mode:?}: got {got}, oracle {expect}"
        );
    }
}

fn patch_oracle(p: &Tensor, t: &Tensor, patch: usize, eps: f64, mode: PatchMode) -> f64 {
    let s = p.shape();
    let mut weights = Vec::new();
    let mut weighted = 0.0f64;
    for n in 0..s.n {
        for c in 0..s.c {
            for ty in (0..s.h).step_by(patch) {
                for tx in (0..s.w).step_by(patch) {
                    let mut diffs = Vec::new();
                    for y in ty..ty + patch {
                        for x in tx..tx + patch {
                            diffs.push(p.at(n, c, y, x) as f64 - t.at(n, c, y, x) as f64);
                        }
                    }
                    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
                    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                        / diffs.len() as f64;
                    let arg = match mode {
                        PatchMode::Literal => (1.0 / (mean.abs() + eps) + 1.0 / (var + eps)).min(80.0),
                        PatchMode::Rectified => mean.abs() + var,
                    };
                    let w = arg.exp();
                    weighted += w * diffs.iter().map(|d| d.abs()).sum::<f64>();
                    weights.push(w);
                }
            }
        }
    }
    let mean_w = weights.iter().sum::<f64>() / weights.len() as f64;
    weighted / (s.count() as f64 * mean_w)
}

#[test]
fn histogram_matches_loop_oracle() {
    let (p, t) = random_pair(5);
    let bins = 32;
    let sigma = 1.0 / 31.0;
    let got = histogram_loss(&p, &t, bins, Some(sigma)).unwrap();

    let hist = |img: &Tensor, c: usize| -> Vec<f64> {
        let mut h = vec![0.0f64; bins];
        for &v in img.plane(0, c) {
            for (b, hb) in h.iter_mut().enumerate() {
                let mu = b as f64 / (bins - 1) as f64;
                let d = v as f64 - mu;
                *hb += (-d * d / (2.0 * sigma * sigma)).exp();
            }
        }
        let sum: f64 = h.iter().sum();
        h.into_iter().map(|v| v / sum).collect()
    };
    let mut expect = 0.0f64;
    for c in 0..3 {
        let hp = hist(&p, c);
        let ht = hist(&t, c);
        expect += hp.iter().zip(&ht).map(|(a, b)| (a - b).abs()).sum::<f64>();
    }
    assert!((got - expect).abs() <= TOL);
}

#[test]
fn edge_loss_matches_compositional_oracle() {
    let (p, t) = random_pair(6);
    let got = edge_loss(&p, &t).unwrap();

    let sobel_mag = |img: &Tensor, c: usize, y: usize, x: usize| -> f64 {
        let sx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let sy = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let mut gx = 0.0f32;
        let mut gy = 0.0f32;
        for ky in 0..3 {
            for kx in 0..3 {
                let v = img.at(0, c, y + ky - 1, x + kx - 1);
                gx += v * sx[ky][kx] as f32;
                gy += v * sy[ky][kx] as f32;
            }
        }
        ((gx * gx + gy * gy + 1e-12) as f64).sqrt()
    };
    let s = p.shape();
    let mut total = 0.0f64;
    let mut count = 0;
    for c in 0..s.c {
        for y in 1..s.h - 1 {
            for x in 1..s.w - 1 {
                total += (sobel_mag(&p, c, y, x) - sobel_mag(&t, c, y, x)).abs();
                count += 1;
            }
        }
    }
    let expect = total / count as f64;
    assert!((got - expect).abs() <= TOL, "got {got}, oracle {expect}");
}

#[test]
fn ssim_matches_direct_windowed_oracle() {
    let (p, t) = random_pair(7);
    let got = ssim(&p, &t).unwrap();
    let expect = ssim_oracle(&p, &t);
    assert!((got - expect).abs() <= 1e-5, "got {got}, oracle {expect}");
}

/// Non-separable direct SSIM: full 11×11 window per pixel with reflection.
fn ssim_oracle(p: &Tensor, t: &Tensor) -> f64 {
    let s = p.shape();
    let (c1, c2) = (0.0001f64, 0.0009f64);
    let mut kernel = [[0.0f64; 11]; 11];
    let mut ksum = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, k) in row.iter_mut().enumerate() {
            let dy = i as f64 - 5.0;
            let dx = j as f64 - 5.0;
            *k = (-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)).exp();
            ksum += *k;
        }
    }
    for row in kernel.iter_mut() {
        for k in row.iter_mut() {
            *k /= ksum;
        }
    }
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        if i < 0 {
            i = -1 - i;
        }
        if i >= n {
            i = 2 * n - 1 - i;
        }
        i as usize
    };
    let mut total = 0.0f64;
    let mut count = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..s.h {
                for x in 0..s.w {
                    let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for (i, row) in kernel.iter().enumerate() {
                        for (j, &k) in row.iter().enumerate() {
                            let iy = reflect(y as isize + i as isize - 5, s.h);
                            let ix = reflect(x as isize + j as isize - 5, s.w);
                            let pv = p.at(n, c, iy, ix) as f64;
                            let tv = t.at(n, c, iy, ix) as f64;
                            mx += k * pv;
                            my += k * tv;
                            mxx += k * pv * pv;
                            myy += k * tv * tv;
                            mxy += k * pv * tv;
                        }
                    }
                    let vx = mxx - mx * mx;
                    let vy = myy - my * my;
                    let cov = mxy - mx * my;
                    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    count += 1;
                }
            }
        }
    }
    total / count as f64
}
