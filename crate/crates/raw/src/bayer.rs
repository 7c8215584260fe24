use std::fmt;

use ispforge_tensor::{Shape, Tensor};

use crate::error::RawError;

/// Which color sits where in the 2×2 CFA tile.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CfaPhase {
    Rggb,
    Grbg,
    Gbrg,
    Bggr,
}

impl CfaPhase {
    /// (dy, dx) of the R, G1 (green in the R row), G2 (green in the B row)
    /// and B sites within the 2×2 tile.
    pub fn offsets(self) -> [(usize, usize); 4] {
        match self {
            CfaPhase::Rggb => [(0, 0), (0, 1), (1, 0), (1, 1)],
            CfaPhase::Grbg => [(0, 1), (0, 0), (1, 1), (1, 0)],
            CfaPhase::Gbrg => [(1, 0), (1, 1), (0, 0), (0, 1)],
            CfaPhase::Bggr => [(1, 1), (1, 0), (0, 1), (0, 0)],
        }
    }

    /// RGB channel (0/1/2) sensed at pixel (y, x).
    pub fn color_at(self, y: usize, x: usize) -> usize {
        let [r, g1, g2, b] = self.offsets();
        let pos = (y % 2, x % 2);
        if pos == r {
            0
        } else if pos == g1 || pos == g2 {
            1
        } else {
            debug_assert_eq!(pos, b);
            2
        }
    }

    pub fn parse(s: &str) -> Result<Self, RawError> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(CfaPhase::Rggb),
            "GRBG" => Ok(CfaPhase::Grbg),
            "GBRG" => Ok(CfaPhase::Gbrg),
            "BGGR" => Ok(CfaPhase::Bggr),
            other => Err(RawError::arg(format!("unknown CFA phase '{other}'"))),
        }
    }
}

impl fmt::Display for CfaPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CfaPhase::Rggb => "RGGB",
            CfaPhase::Grbg => "GRBG",
            CfaPhase::Gbrg => "GBRG",
            CfaPhase::Bggr => "BGGR",
        })
    }
}

/// Single-channel mosaiced sensor image with level metadata.
#[derive(Clone, PartialEq, Debug)]
pub struct BayerFrame {
    pub data: Vec<u16>,
    pub width: usize,
    pub height: usize,
    pub cfa: CfaPhase,
    pub black_level: u16,
    pub white_level: u16,
}

pub const DEFAULT_BLACK: u16 = 64;
pub const DEFAULT_WHITE: u16 = 1023;

impl BayerFrame {
    pub fn new(
        data: Vec<u16>,
        width: usize,
        height: usize,
        cfa: CfaPhase,
        black_level: u16,
        white_level: u16,
    ) -> Result<Self, RawError> {
        if width % 2 != 0 || height % 2 != 0 || width == 0 || height == 0 {
            return Err(RawError::arg(format!(
                "frame dims must be even and nonzero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(RawError::arg(format!(
                "frame holds {} samples, expected {}",
                data.len(),
                width * height
            )));
        }
        if black_level >= white_level {
            return Err(RawError::arg(format!(
                "black level {black_level} must be below white level {white_level}"
            )));
        }
        if let Some(&v) = data.iter().find(|&&v| v > white_level) {
            return Err(RawError::arg(format!(
                "sample {v} exceeds white level {white_level}"
            )));
        }
        Ok(BayerFrame {
            data,
            width,
            height,
            cfa,
            black_level,
            white_level,
        })
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u16 {
        self.data[y * self.width + x]
    }

    /// Crop a sub-frame; the offsets must be even so the CFA phase is
    /// preserved.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<BayerFrame, RawError> {
        if y0 % 2 != 0 || x0 % 2 != 0 {
            return Err(RawError::arg(format!(
                "crop offsets must be even to preserve the CFA phase, got ({y0}, {x0})"
            )));
        }
        if y0 + h > self.height || x0 + w > self.width {
            return Err(RawError::arg(format!(
                "crop {h}x{w}@({y0},{x0}) exceeds frame {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        BayerFrame::new(data, w, h, self.cfa, self.black_level, self.white_level)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Normalize {
    /// v' = (v − black) / (white − black), clamped to [0, 1].
    Levels,
    /// Raw counts carried through as f32.
    Counts,
}

/// Rearrange the mosaic into a 4-channel half-resolution tensor in
/// (R, G1, G2, B) order.
pub fn pack_bayer(frame: &BayerFrame, normalize: Normalize) -> Tensor {
    let (hh, hw) = (frame.height / 2, frame.width / 2);
    let mut out = Tensor::zeros(Shape::new(1, 4, hh, hw));
    let offsets = frame.cfa.offsets();
    let scale = 1.0 / (frame.white_level - frame.black_level) as f32;
    for (ch, (dy, dx)) in offsets.into_iter().enumerate() {
        let plane = out.plane_mut(0, ch);
        for ty in 0..hh {
            for tx in 0..hw {
                let v = frame.at(2 * ty + dy, 2 * tx + dx);
                plane[ty * hw + tx] = match normalize {
                    Normalize::Counts => v as f32,
                    Normalize::Levels => {
                        ((v as f32 - frame.black_level as f32) * scale).clamp(0.0, 1.0)
                    }
                };
            }
        }
    }
    out
}

/// Inverse of [`pack_bayer`]: reassemble the mosaic from a packed tensor.
pub fn unpack_bayer(
    packed: &Tensor,
    cfa: CfaPhase,
    black_level: u16,
    white_level: u16,
    normalize: Normalize,
) -> Result<BayerFrame, RawError> {
    let s = packed.shape();
    if s.n != 1 || s.c != 4 {
        return Err(RawError::arg(format!(
            "packed tensor must be (1,4,h/2,w/2), got {s}"
        )));
    }
    let (h, w) = (s.h * 2, s.w * 2);
    let mut data = vec![0u16; h * w];
    let range = (white_level - black_level) as f32;
    for (ch, (dy, dx)) in cfa.offsets().into_iter().enumerate() {
        let plane = packed.plane(0, ch);
        for ty in 0..s.h {
            for tx in 0..s.w {
                let v = plane[ty * s.w + tx];
                let counts = match normalize {
                    Normalize::Counts => v.round(),
                    Normalize::Levels => black_level as f32 + (v.clamp(0.0, 1.0) * range).round(),
                };
                data[(2 * ty + dy) * w + 2 * tx + dx] =
                    counts.clamp(0.0, white_level as f32) as u16;
            }
        }
    }
    BayerFrame::new(data, w, h, cfa, black_level, white_level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_rggb_definitional() {
        let frame = BayerFrame::new(vec![10, 20, 30, 40], 2, 2, CfaPhase::Rggb, 0, 1023).unwrap();
        let t = pack_bayer(&frame, Normalize::Levels);
        assert_eq!(t.shape(), Shape::new(1, 4, 1, 1));
        let expected: Vec<f32> = [10.0, 20.0, 30.0, 40.0].iter().map(|v| v / 1023.0).collect();
        assert_eq!(t.data(), &expected[..]);
    }

    #[test]
    fn all_black_packs_to_zero() {
        let frame =
            BayerFrame::new(vec![64; 16], 4, 4, CfaPhase::Rggb, 64, 1023).unwrap();
        let t = pack_bayer(&frame, Normalize::Levels);
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pack_unpack_roundtrip_counts_is_exact() {
        for cfa in [CfaPhase::Rggb, CfaPhase::Grbg, CfaPhase::Gbrg, CfaPhase::Bggr] {
            let data: Vec<u16> = (0..36).map(|i| (i * 23 % 1024) as u16).collect();
            let frame = BayerFrame::new(data, 6, 6, cfa, 64, 1023).unwrap();
            let rt = unpack_bayer(
                &pack_bayer(&frame, Normalize::Counts),
                cfa,
                64,
                1023,
                Normalize::Counts,
            )
            .unwrap();
            assert_eq!(rt, frame);
        }
    }

    #[test]
    fn pack_unpack_roundtrip_levels_recovers_counts() {
        let data: Vec<u16> = (0..36).map(|i| 64 + (i * 17 % 960) as u16).collect();
        let frame = BayerFrame::new(data, 6, 6, CfaPhase::Rggb, 64, 1023).unwrap();
        let rt = unpack_bayer(
            &pack_bayer(&frame, Normalize::Levels),
            CfaPhase::Rggb,
            64,
            1023,
            Normalize::Levels,
        )
        .unwrap();
        assert_eq!(rt, frame);
    }

    #[test]
    fn odd_dims_rejected() {
        assert!(BayerFrame::new(vec![0; 6], 3, 2, CfaPhase::Rggb, 64, 1023).is_err());
    }

    #[test]
    fn color_at_matches_offsets() {
        for cfa in [CfaPhase::Rggb, CfaPhase::Grbg, CfaPhase::Gbrg, CfaPhase::Bggr] {
            let [r, g1, g2, b] = cfa.offsets();
            assert_eq!(cfa.color_at(r.0, r.1), 0);
            assert_eq!(cfa.color_at(g1.0, g1.1), 1);
            assert_eq!(cfa.color_at(g2.0, g2.1), 1);
            assert_eq!(cfa.color_at(b.0, b.1), 2);
        }
    }

    #[test]
    fn crop_requires_even_offsets() {
        let frame = BayerFrame::new(vec![0; 64], 8, 8, CfaPhase::Rggb, 64, 1023).unwrap();
        assert!(frame.crop(1, 0, 4, 4).is_err());
        assert!(frame.crop(2, 4, 4, 4).is_ok());
    }
}
