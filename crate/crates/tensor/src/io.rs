//! File interchange: raw f32 tensor blobs with a text sidecar header, PPM/PNG
//! for 8-bit RGB in [0, 1] (value = round(255·v)), and 16-bit PGM for raw
//! sensor data. All writers go through an atomic temp-file + rename.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process;

use crate::error::TensorError;
use crate::tensor::{Shape, Tensor};

/// Write `bytes` to `path` atomically (temp file in the same directory, then
/// rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), TensorError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| TensorError::Io(format!("{}: not a file path", path.display())))?;
    let tmp_name = format!(".{}.{}.tmp", file_name.to_string_lossy(), process::id());
    let tmp: PathBuf = match dir {
        Some(d) => d.join(&tmp_name),
        None => PathBuf::from(&tmp_name),
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn hdr_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".hdr");
    PathBuf::from(os)
}

/// Save a tensor as a flat little-endian f32 blob plus `<path>.hdr` sidecar
/// header ("nchw N C H W").
pub fn save_tensor_blob(path: &Path, tensor: &Tensor) -> Result<(), TensorError> {
    let mut bytes = Vec::with_capacity(tensor.data().len() * 4);
    for v in tensor.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &bytes)?;
    let s = tensor.shape();
    atomic_write(
        &hdr_path(path),
        format!("nchw {} {} {} {}\n", s.n, s.c, s.h, s.w).as_bytes(),
    )
}

pub fn load_tensor_blob(path: &Path) -> Result<Tensor, TensorError> {
    let hdr = fs::read_to_string(hdr_path(path))?;
    let fields: Vec<&str> = hdr.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "nchw" {
        return Err(TensorError::Format {
            path: hdr_path(path).display().to_string(),
            msg: "expected header 'nchw N C H W'".into(),
        });
    }
    let dims: Vec<usize> = fields[1..]
        .iter()
        .map(|f| f.parse())
        .collect::<Result<_, _>>()
        .map_err(|e| TensorError::Format {
            path: hdr_path(path).display().to_string(),
            msg: format!("bad dimension: {e}"),
        })?;
    let shape = Shape::new(dims[0], dims[1], dims[2], dims[3]);
    let bytes = fs::read(path)?;
    if bytes.len() != shape.count() * 4 {
        return Err(TensorError::Format {
            path: path.display().to_string(),
            msg: format!("blob holds {} bytes, header implies {}", bytes.len(), shape.count() * 4),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Tensor::new(shape, data)
}

/// First batch image of a (·, 3, h, w) tensor as interleaved 8-bit RGB.
pub fn tensor_to_rgb8(tensor: &Tensor) -> Result<(usize, usize, Vec<u8>), TensorError> {
    let s = tensor.shape();
    if s.c != 3 {
        return Err(TensorError::shape("tensor_to_rgb8", "channels", 3, s.c));
    }
    let (r, g, b) = (tensor.plane(0, 0), tensor.plane(0, 1), tensor.plane(0, 2));
    let mut bytes = Vec::with_capacity(s.h * s.w * 3);
    for i in 0..s.h * s.w {
        for v in [r[i], g[i], b[i]] {
            bytes.push((255.0 * v.clamp(0.0, 1.0)).round() as u8);
        }
    }
    Ok((s.w, s.h, bytes))
}

pub fn rgb8_to_tensor(width: usize, height: usize, bytes: &[u8]) -> Result<Tensor, TensorError> {
    if bytes.len() != width * height * 3 {
        return Err(TensorError::shape(
            "rgb8_to_tensor",
            "byte length",
            width * height * 3,
            bytes.len(),
        ));
    }
    let mut t = Tensor::zeros(Shape::new(1, 3, height, width));
    for c in 0..3 {
        let plane = t.plane_mut(0, c);
        for (i, v) in plane.iter_mut().enumerate() {
            *v = bytes[i * 3 + c] as f32 / 255.0;
        }
    }
    Ok(t)
}

/// 8-bit binary PPM (P6).
pub fn save_ppm(path: &Path, tensor: &Tensor) -> Result<(), TensorError> {
    let (w, h, rgb) = tensor_to_rgb8(tensor)?;
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(&rgb);
    atomic_write(path, &bytes)
}

pub fn load_ppm(path: &Path) -> Result<Tensor, TensorError> {
    let bytes = fs::read(path)?;
    let (magic, w, h, maxval, data) = parse_pnm(path, &bytes)?;
    if magic != "P6" || maxval != 255 {
        return Err(TensorError::Format {
            path: path.display().to_string(),
            msg: format!("expected 8-bit P6, got {magic} maxval {maxval}"),
        });
    }
    rgb8_to_tensor(w, h, data)
}

/// 16-bit binary PGM (P5), big-endian samples per the netpbm convention.
pub fn save_pgm16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<(), TensorError> {
    if samples.len() != width * height {
        return Err(TensorError::shape(
            "save_pgm16",
            "sample count",
            width * height,
            samples.len(),
        ));
    }
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in samples {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    atomic_write(path, &bytes)
}

pub fn load_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>), TensorError> {
    let bytes = fs::read(path)?;
    let (magic, w, h, maxval, data) = parse_pnm(path, &bytes)?;
    if magic != "P5" || maxval != 65535 {
        return Err(TensorError::Format {
            path: path.display().to_string(),
            msg: format!("expected 16-bit P5, got {magic} maxval {maxval}"),
        });
    }
    if data.len() != w * h * 2 {
        return Err(TensorError::Format {
            path: path.display().to_string(),
            msg: format!("pixel payload holds {} bytes, expected {}", data.len(), w * h * 2),
        });
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((w, h, samples))
}

fn parse_pnm<'a>(
    path: &Path,
    bytes: &'a [u8],
) -> Result<(&'a str, usize, usize, u32, &'a [u8]), TensorError> {
    let bad = |msg: &str| TensorError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    };
    let mut pos = 0;
    let mut fields: Vec<(usize, usize)> = Vec::new();
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push((start, pos));
    }
    if fields.len() < 4 || pos >= bytes.len() {
        return Err(bad("truncated pnm header"));
    }
    pos += 1; // single whitespace after maxval
    let field = |i: usize| std::str::from_utf8(&bytes[fields[i].0..fields[i].1]).unwrap_or("");
    let magic = field(0);
    let w: usize = field(1).parse().map_err(|_| bad("bad width"))?;
    let h: usize = field(2).parse().map_err(|_| bad("bad height"))?;
    let maxval: u32 = field(3).parse().map_err(|_| bad("bad maxval"))?;
    Ok((magic, w, h, maxval, &bytes[pos..]))
}

/// PNG-encode the first batch image of a (·, 3, h, w) tensor.
pub fn png_bytes(tensor: &Tensor) -> Result<Vec<u8>, TensorError> {
    let (w, h, rgb) = tensor_to_rgb8(tensor)?;
    let img = image::RgbImage::from_raw(w as u32, h as u32, rgb)
        .ok_or_else(|| TensorError::arg("png", "image buffer construction failed"))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| TensorError::Io(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn save_png(path: &Path, tensor: &Tensor) -> Result<(), TensorError> {
    atomic_write(path, &png_bytes(tensor)?)
}

pub fn load_png(path: &Path) -> Result<Tensor, TensorError> {
    let bytes = fs::read(path)?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| TensorError::Format {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?
        .to_rgb8();
    rgb8_to_tensor(img.width() as usize, img.height() as usize, img.as_raw())
}
