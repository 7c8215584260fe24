//! On-disk dataset layout: `<dir>/<split>/<id>.pgm` (16-bit raw) +
//! `<id>.png` (target RGB) + `manifest.tsv` recording per-image seeds and
//! the synthesis parameters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ispforge_tensor::{io, Tensor};

use crate::bayer::{BayerFrame, CfaPhase};
use crate::error::RawError;
use crate::patches::{extract_patches, PatchPair};
use crate::synth::{synth_raw, synth_rgb_image, SynthParams};

const MANIFEST_VERSION: &str = "ispforge-dataset/1";
const NOISE_SALT: u64 = 0x6E6F_6973_6500;

#[derive(Clone, Copy, Debug)]
pub struct DatasetSpec {
    pub count: usize,
    /// Square image size, pixels (even).
    pub size: usize,
    pub seed: u64,
    pub synth: SynthParams,
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub id: String,
    pub seed: u64,
    pub frame: BayerFrame,
    pub rgb: Tensor,
}

/// Generate `spec.count` synthetic pairs under `<dir>/<split>/`. Per-image
/// seeds derive as `seed ⊕ index`, so regeneration of any subset agrees with
/// a full serial run byte for byte.
pub fn generate_split(dir: &Path, split: &str, spec: &DatasetSpec) -> Result<(), RawError> {
    spec.synth.validate()?;
    if spec.size % 2 != 0 || spec.size == 0 {
        return Err(RawError::arg(format!("size must be even, got {}", spec.size)));
    }
    let split_dir = dir.join(split);
    fs::create_dir_all(&split_dir)?;

    let p = &spec.synth;
    let mut manifest = format!(
        "# {MANIFEST_VERSION} cfa={} black={} white={} size={}\n",
        p.cfa, p.black_level, p.white_level, spec.size
    );
    manifest.push_str("id\tseed\tgain_r\tgain_g\tgain_b\tread_noise\tshot_noise\n");
    for i in 0..spec.count {
        let img_seed = spec.seed ^ (i as u64);
        let rgb = synth_rgb_image(spec.size, spec.size, img_seed);
        let frame = synth_raw(&rgb, p, img_seed ^ NOISE_SALT)?;
        let id = format!("{i:04}");
        io::save_pgm16(
            &split_dir.join(format!("{id}.pgm")),
            frame.width,
            frame.height,
            &frame.data,
        )?;
        io::save_png(&split_dir.join(format!("{id}.png")), &rgb)?;
        writeln!(
            manifest,
            "{id}\t{img_seed}\t{}\t{}\t{}\t{}\t{}",
            p.gains[0], p.gains[1], p.gains[2], p.read_noise, p.shot_noise
        )
        .unwrap();
    }
    io::atomic_write(&split_dir.join("manifest.tsv"), manifest.as_bytes())?;
    Ok(())
}

/// Read every sample of a split back, using the manifest for level and CFA
/// metadata.
pub fn load_split(dir: &Path, split: &str) -> Result<Vec<SampleRecord>, RawError> {
    let split_dir = dir.join(split);
    let manifest_path = split_dir.join("manifest.tsv");
    let text = fs::read_to_string(&manifest_path).map_err(|e| RawError::Dataset {
        path: manifest_path.display().to_string(),
        msg: e.to_string(),
    })?;
    let bad = |msg: String| RawError::Dataset {
        path: manifest_path.display().to_string(),
        msg,
    };

    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty manifest".into()))?;
    if !header.starts_with(&format!("# {MANIFEST_VERSION}")) {
        return Err(bad(format!("unsupported manifest header '{header}'")));
    }
    let mut cfa = CfaPhase::Rggb;
    let mut black = 64u16;
    let mut white = 1023u16;
    for field in header.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = field.split_once('=') {
            match k {
                "cfa" => cfa = CfaPhase::parse(v)?,
                "black" => black = v.parse().map_err(|_| bad("bad black level".into()))?,
                "white" => white = v.parse().map_err(|_| bad("bad white level".into()))?,
                _ => {}
            }
        }
    }

    let mut records = Vec::new();
    for line in lines.skip(1) {
        // skip the column header
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let id = cols.next().ok_or_else(|| bad("missing id".into()))?.to_string();
        let seed: u64 = cols
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("bad seed for id {id}")))?;
        let (w, h, samples) = io::load_pgm16(&split_dir.join(format!("{id}.pgm")))?;
        let frame = BayerFrame::new(samples, w, h, cfa, black, white)?;
        let rgb = io::load_png(&split_dir.join(format!("{id}.png")))?;
        records.push(SampleRecord {
            id,
            seed,
            frame,
            rgb,
        });
    }
    Ok(records)
}

/// Load a split and cut every frame into non-overlapping aligned patches.
pub fn load_patch_pairs(dir: &Path, split: &str, patch: usize) -> Result<Vec<PatchPair>, RawError> {
    let mut pairs = Vec::new();
    for record in load_split(dir, split)? {
        pairs.extend(extract_patches(
            &record.frame,
            &record.rgb,
            patch,
            patch,
            None,
        )?);
    }
    Ok(pairs)
}
