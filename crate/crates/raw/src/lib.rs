//! Bayer RAW handling: mosaic packing, a deterministic synthetic sensor
//! pipeline (sRGB → linear → white-balance inversion → mosaic → noise →
//! quantization), patch extraction and masking, a classical bilinear
//! demosaic baseline, and the on-disk dataset layout.

mod bayer;
mod dataset;
mod demosaic;
mod error;
mod patches;
mod synth;

pub use bayer::{pack_bayer, unpack_bayer, BayerFrame, CfaPhase, Normalize};
pub use dataset::{generate_split, load_patch_pairs, load_split, DatasetSpec, SampleRecord};
pub use demosaic::{demosaic_bilinear, Transfer};
pub use error::RawError;
pub use patches::{extract_patches, mask_patches, random_patches, PatchPair};
pub use synth::{srgb_eotf, srgb_oetf, synth_raw, synth_rgb_image, SynthParams};
