//! Classical bilinear CFA interpolation, the non-learned baseline the
//! trained models compete against.

use ispforge_tensor::{Shape, Tensor};

use crate::bayer::BayerFrame;
use crate::error::RawError;
use crate::synth::srgb_oetf;

/// Output transfer curve applied after white balance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transfer {
    /// Exact sRGB encode — the inverse of the synthetic pipeline's decode.
    Srgb,
    /// Pure power law v^(1/g), e.g. the common 2.2 approximation.
    Gamma(f32),
}

impl Transfer {
    fn encode(self, v: f32) -> f32 {
        match self {
            Transfer::Srgb => srgb_oetf(v),
            Transfer::Gamma(g) => v.powf(1.0 / g),
        }
    }
}

/// Bilinear demosaic + per-channel gain + transfer encode; output
/// (1, 3, h, w) in [0, 1].
///
/// Interpolation is a masked normalized 3×3 pass: R/B use the classic
/// [[1,2,1],[2,4,2],[1,2,1]] kernel, G (whose sites form a quincunx) the
/// cross kernel [[0,1,0],[1,4,1],[0,1,0]]. At interior pixels this
/// reproduces the textbook bilinear weights exactly; at the border it
/// renormalizes over the samples actually present, so constant scenes stay
/// constant.
pub fn demosaic_bilinear(
    frame: &BayerFrame,
    gains: [f32; 3],
    transfer: Transfer,
) -> Result<Tensor, RawError> {
    if gains.iter().any(|&g| !(g > 0.0)) {
        return Err(RawError::arg(format!("gains must be > 0, got {gains:?}")));
    }
    if let Transfer::Gamma(g) = transfer {
        if !(g > 0.0) {
            return Err(RawError::arg(format!("gamma must be > 0, got {g}")));
        }
    }
    let (h, w) = (frame.height, frame.width);
    let black = frame.black_level as f32;
    let scale = 1.0 / (frame.white_level - frame.black_level) as f32;

    const KERNEL_RB: [[f32; 3]; 3] = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];
    const KERNEL_G: [[f32; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]];

    let mut out = Tensor::zeros(Shape::new(1, 3, h, w));
    for ch in 0..3 {
        let kernel = if ch == 1 { &KERNEL_G } else { &KERNEL_RB };
        let plane = out.plane_mut(0, ch);
        for y in 0..h {
            for x in 0..w {
                let mut num = 0.0f32;
                let mut den = 0.0f32;
                for (ky, row) in kernel.iter().enumerate() {
                    let iy = y as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for (kx, &kw) in row.iter().enumerate() {
                        let ix = x as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let (iy, ix) = (iy as usize, ix as usize);
                        if frame.cfa.color_at(iy, ix) != ch {
                            continue;
                        }
                        let v = ((frame.at(iy, ix) as f32 - black) * scale).clamp(0.0, 1.0);
                        num += kw * v;
                        den += kw;
                    }
                }
                debug_assert!(den > 0.0);
                let linear = (num / den) * gains[ch];
                plane[y * w + x] = transfer.encode(linear.clamp(0.0, 1.0)).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayer::CfaPhase;
    use crate::synth::{srgb_eotf, synth_raw, SynthParams};

    #[test]
    fn constant_gray_recovers_constant_rgb() {
        let level = 64.0 + 0.4 * (1023.0 - 64.0);
        let frame = BayerFrame::new(
            vec![level as u16; 64],
            8,
            8,
            CfaPhase::Rggb,
            64,
            1023,
        )
        .unwrap();
        let out = demosaic_bilinear(&frame, [1.0, 1.0, 1.0], Transfer::Srgb).unwrap();
        let first = out.data()[0];
        assert!(out.data().iter().all(|&v| (v - first).abs() < 1e-6));
    }

    #[test]
    fn output_always_in_unit_range() {
        let data: Vec<u16> = (0..256).map(|i| 64 + (i * 3 % 960) as u16).collect();
        let frame = BayerFrame::new(data, 16, 16, CfaPhase::Rggb, 64, 1023).unwrap();
        let out = demosaic_bilinear(&frame, [2.5, 1.0, 1.9], Transfer::Gamma(2.2)).unwrap();
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn interior_matches_textbook_bilinear_on_hand_case() {
        // 4x4 RGGB ramp, unit gains, linear output (gamma 1)
        #[rustfmt::skip]
        let counts: Vec<u16> = vec![
            100, 200, 300, 400,
            500, 600, 700, 800,
            900, 250, 350, 450,
            150, 550, 650, 750,
        ];
        let frame = BayerFrame::new(counts.clone(), 4, 4, CfaPhase::Rggb, 0, 1023).unwrap();
        let out = demosaic_bilinear(&frame, [1.0, 1.0, 1.0], Transfer::Gamma(1.0)).unwrap();
        let v = |y: usize, x: usize| (counts[y * 4 + x] as f32) / 1023.0;
        // pixel (1,1) is a B site: R from 4 diagonals, G from 4 cross neighbors
        let r_exp = (v(0, 0) + v(0, 2) + v(2, 0) + v(2, 2)) / 4.0;
        let g_exp = (v(0, 1) + v(1, 0) + v(1, 2) + v(2, 1)) / 4.0;
        assert!((out.at(0, 0, 1, 1) - r_exp).abs() < 1e-6);
        assert!((out.at(0, 1, 1, 1) - g_exp).abs() < 1e-6);
        assert!((out.at(0, 2, 1, 1) - v(1, 1)).abs() < 1e-6);
        // pixel (1,2) is a G site in the B row: R from the vertical pair, B horizontal
        let r_exp_12 = (v(0, 2) + v(2, 2)) / 2.0;
        let b_exp_12 = (v(1, 1) + v(1, 3)) / 2.0;
        assert!((out.at(0, 0, 1, 2) - r_exp_12).abs() < 1e-6);
        assert!((out.at(0, 1, 1, 2) - v(1, 2)).abs() < 1e-6);
        assert!((out.at(0, 2, 1, 2) - b_exp_12).abs() < 1e-6);
    }

    #[test]
    fn synth_then_demosaic_recovers_constant_colors() {
        for color in [[0.5f32, 0.5, 0.5], [0.8, 0.3, 0.6], [0.1, 0.7, 0.4]] {
            let rgb = Tensor::from_fn(Shape::new(1, 3, 16, 16), |_, c, _, _| color[c]);
            let params = SynthParams {
                read_noise: 0.0,
                shot_noise: 0.0,
                ..Default::default()
            };
            let frame = synth_raw(&rgb, &params, 0).unwrap();
            let out =
                demosaic_bilinear(&frame, params.gains, Transfer::Srgb).unwrap();
            for c in 0..3 {
                let got = out.at(0, c, 8, 8);
                assert!(
                    (got - color[c]).abs() <= 1.0 / 255.0,
                    "channel {c}: got {got}, want {} (linear {})",
                    color[c],
                    srgb_eotf(color[c])
                );
            }
        }
    }
}
