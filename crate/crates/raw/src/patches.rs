use ispforge_tensor::{Shape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayer::{pack_bayer, BayerFrame, Normalize};
use crate::error::RawError;

/// An aligned training sample: packed normalized raw (1, 4, s/2, s/2) and the
/// RGB target (1, 3, s, s).
#[derive(Clone, Debug)]
pub struct PatchPair {
    pub raw: Tensor,
    pub rgb: Tensor,
}

fn crop_rgb(rgb: &Tensor, y0: usize, x0: usize, size: usize) -> Tensor {
    let s = rgb.shape();
    Tensor::from_fn(Shape::new(1, s.c, size, size), |_, c, y, x| {
        rgb.at(0, c, y0 + y, x0 + x)
    })
}

fn make_pair(
    frame: &BayerFrame,
    rgb: &Tensor,
    y0: usize,
    x0: usize,
    size: usize,
) -> Result<PatchPair, RawError> {
    let sub = frame.crop(y0, x0, size, size)?;
    Ok(PatchPair {
        raw: pack_bayer(&sub, Normalize::Levels),
        rgb: crop_rgb(rgb, y0, x0, size),
    })
}

fn check_pair_geometry(frame: &BayerFrame, rgb: &Tensor, size: usize) -> Result<(), RawError> {
    let s = rgb.shape();
    if s.h != frame.height || s.w != frame.width || s.c != 3 || s.n != 1 {
        return Err(RawError::arg(format!(
            "rgb {s} does not align with frame {}x{}",
            frame.height, frame.width
        )));
    }
    if size % 2 != 0 || size == 0 {
        return Err(RawError::arg(format!("patch size must be even, got {size}")));
    }
    if size > frame.height || size > frame.width {
        return Err(RawError::arg(format!(
            "patch size {size} exceeds image {}x{}",
            frame.height, frame.width
        )));
    }
    Ok(())
}

/// Grid positions along one axis, snapped down to even coordinates.
fn grid_axis(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut offs: Vec<usize> = (0..=extent - size)
        .step_by(stride.max(1))
        .map(|o| o & !1)
        .collect();
    offs.dedup();
    offs
}

/// Deterministic grid extraction. Offsets are snapped to even coordinates to
/// preserve the CFA phase; pass `shuffle_seed` to shuffle the patch order
/// reproducibly.
pub fn extract_patches(
    frame: &BayerFrame,
    rgb: &Tensor,
    size: usize,
    stride: usize,
    shuffle_seed: Option<u64>,
) -> Result<Vec<PatchPair>, RawError> {
    check_pair_geometry(frame, rgb, size)?;
    let mut pairs = Vec::new();
    for y0 in grid_axis(frame.height, size, stride) {
        for x0 in grid_axis(frame.width, size, stride) {
            pairs.push(make_pair(frame, rgb, y0, x0, size)?);
        }
    }
    if let Some(seed) = shuffle_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairs.shuffle(&mut rng);
    }
    Ok(pairs)
}

/// Seeded random crops at even offsets.
pub fn random_patches(
    frame: &BayerFrame,
    rgb: &Tensor,
    size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PatchPair>, RawError> {
    check_pair_geometry(frame, rgb, size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let y0 = rng.random_range(0..=(frame.height - size) / 2) * 2;
        let x0 = rng.random_range(0..=(frame.width - size) / 2) * 2;
        pairs.push(make_pair(frame, rgb, y0, x0, size)?);
    }
    Ok(pairs)
}

/// Zero a seeded random fraction of `cell`×`cell` spatial tiles across all
/// channels. Returns the corrupted tensor and a (1,1,h,w) mask that is 1.0
/// over the zeroed cells, for loss weighting.
pub fn mask_patches(
    raw: &Tensor,
    cell: usize,
    fraction: f32,
    seed: u64,
) -> Result<(Tensor, Tensor), RawError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(RawError::arg(format!("fraction must be in [0,1], got {fraction}")));
    }
    if cell == 0 {
        return Err(RawError::arg("cell size must be ≥ 1"));
    }
    let s = raw.shape();
    let cells_y = s.h.div_ceil(cell);
    let cells_x = s.w.div_ceil(cell);
    let n_cells = cells_y * cells_x;
    let k = ((fraction as f64) * n_cells as f64).round() as usize;

    let mut indices: Vec<usize> = (0..n_cells).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(k);

    let mut masked = raw.clone();
    let mut mask = Tensor::zeros(Shape::new(1, 1, s.h, s.w));
    for idx in indices {
        let (cy, cx) = (idx / cells_x, idx % cells_x);
        for y in cy * cell..((cy + 1) * cell).min(s.h) {
            for x in cx * cell..((cx + 1) * cell).min(s.w) {
                *mask.at_mut(0, 0, y, x) = 1.0;
                for n in 0..s.n {
                    for c in 0..s.c {
                        *masked.at_mut(n, c, y, x) = 0.0;
                    }
                }
            }
        }
    }
    Ok((masked, mask))
}
