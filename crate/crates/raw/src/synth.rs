//! Deterministic synthetic sensor pipeline. Stands in for real paired
//! RAW/RGB captures: a procedural RGB scene is pushed backwards through an
//! idealized camera (sRGB decode, white-balance inversion, CFA mosaic, read
//! and shot noise, quantization).

use ispforge_tensor::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bayer::{BayerFrame, CfaPhase, DEFAULT_BLACK, DEFAULT_WHITE};
use crate::error::RawError;

/// sRGB electro-optical transfer function (decode to linear).
pub fn srgb_eotf(v: f32) -> f32 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB opto-electronic transfer function (encode from linear).
pub fn srgb_oetf(v: f32) -> f32 {
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SynthParams {
    /// Per-channel white-balance gains the virtual ISP would apply; the
    /// sensor simulation divides by them.
    pub gains: [f32; 3],
    /// Gaussian read noise, sensor counts.
    pub read_noise: f32,
    /// Shot noise factor k: variance k·signal, sensor counts.
    pub shot_noise: f32,
    pub cfa: CfaPhase,
    pub black_level: u16,
    pub white_level: u16,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            gains: [2.0, 1.0, 1.8],
            read_noise: 2.0,
            shot_noise: 1.0,
            cfa: CfaPhase::Rggb,
            black_level: DEFAULT_BLACK,
            white_level: DEFAULT_WHITE,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), RawError> {
        if self.gains.iter().any(|&g| !(g > 0.0)) {
            return Err(RawError::arg(format!("gains must be > 0, got {:?}", self.gains)));
        }
        if self.read_noise < 0.0 || self.shot_noise < 0.0 {
            return Err(RawError::arg("noise parameters must be ≥ 0"));
        }
        if self.black_level >= self.white_level {
            return Err(RawError::arg(format!(
                "black level {} must be below white level {}",
                self.black_level, self.white_level
            )));
        }
        Ok(())
    }
}

/// Mosaic an sRGB image (values in [0, 1]) into a noisy quantized sensor
/// frame. Fully deterministic given `seed`.
pub fn synth_raw(rgb: &Tensor, params: &SynthParams, seed: u64) -> Result<BayerFrame, RawError> {
    params.validate()?;
    let s = rgb.shape();
    if s.n != 1 || s.c != 3 {
        return Err(RawError::arg(format!("rgb tensor must be (1,3,h,w), got {s}")));
    }
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(RawError::arg(format!("dims must be even, got {}x{}", s.h, s.w)));
    }
    let black = params.black_level as f32;
    let range = (params.white_level - params.black_level) as f32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(s.h * s.w);
    for y in 0..s.h {
        for x in 0..s.w {
            let ch = params.cfa.color_at(y, x);
            let linear = srgb_eotf(rgb.at(0, ch, y, x).clamp(0.0, 1.0));
            let signal = (linear / params.gains[ch]) * range;
            let sigma = (params.read_noise * params.read_noise
                + params.shot_noise * signal.max(0.0))
            .sqrt();
            let noise: f32 = if sigma > 0.0 {
                let n: f32 = StandardNormal.sample(&mut rng);
                n * sigma
            } else {
                0.0
            };
            let value = (black + signal + noise).round();
            data.push(value.clamp(black, params.white_level as f32) as u16);
        }
    }
    BayerFrame::new(
        data,
        s.w,
        s.h,
        params.cfa,
        params.black_level,
        params.white_level,
    )
}

/// Procedural sRGB test scene: smooth gradients, soft-edged shapes and a few
/// sinusoidal gratings, clamped away from the extremes. Deterministic given
/// `seed`.
pub fn synth_rgb_image(width: usize, height: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(1, 3, height, width);
    let mut img = Tensor::zeros(shape);

    // base: per-channel linear gradient
    let mut base = [[0.0f32; 3]; 3]; // [channel][c0, gx, gy]
    for ch in base.iter_mut() {
        ch[0] = rng.random_range(0.25..0.65);
        ch[1] = rng.random_range(-0.25..0.25);
        ch[2] = rng.random_range(-0.25..0.25);
    }
    for c in 0..3 {
        let [c0, gx, gy] = base[c];
        let plane = img.plane_mut(0, c);
        for y in 0..height {
            let fy = y as f32 / height as f32;
            for x in 0..width {
                let fx = x as f32 / width as f32;
                plane[y * width + x] = c0 + gx * fx + gy * fy;
            }
        }
    }

    // soft-edged ellipses
    let n_shapes = rng.random_range(5..=9);
    for _ in 0..n_shapes {
        let cx = rng.random_range(0.0..width as f32);
        let cy = rng.random_range(0.0..height as f32);
        let rx = rng.random_range(0.08..0.35) * width as f32;
        let ry = rng.random_range(0.08..0.35) * height as f32;
        let softness = rng.random_range(0.5..3.0);
        let color: [f32; 3] = [
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
        ];
        let alpha = rng.random_range(0.35..0.9);
        for c in 0..3 {
            let plane = img.plane_mut(0, c);
            for y in 0..height {
                for x in 0..width {
                    let dx = (x as f32 - cx) / rx;
                    let dy = (y as f32 - cy) / ry;
                    let d = (dx * dx + dy * dy).sqrt();
                    // smooth falloff around the unit radius
                    let cover = 1.0 / (1.0 + ((d - 1.0) * 8.0 * softness).exp());
                    let a = alpha * cover;
                    let p = &mut plane[y * width + x];
                    *p = *p * (1.0 - a) + color[c] * a;
                }
            }
        }
    }

    // gratings give the demosaicer real work
    let n_waves = rng.random_range(2..=4);
    for _ in 0..n_waves {
        let freq = rng.random_range(0.03..0.14) * std::f32::consts::TAU;
        let angle = rng.random_range(0.0..std::f32::consts::PI);
        let phase = rng.random_range(0.0..std::f32::consts::TAU);
        let amp = rng.random_range(0.02..0.07);
        let (dx, dy) = (angle.cos(), angle.sin());
        let weights: [f32; 3] = [
            rng.random_range(0.3..1.0),
            rng.random_range(0.3..1.0),
            rng.random_range(0.3..1.0),
        ];
        for c in 0..3 {
            let plane = img.plane_mut(0, c);
            for y in 0..height {
                for x in 0..width {
                    let t = (x as f32 * dx + y as f32 * dy) * freq + phase;
                    plane[y * width + x] += amp * weights[c] * t.sin();
                }
            }
        }
    }

    img.map(|v| v.clamp(0.02, 0.98))
}
