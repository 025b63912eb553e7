//! Binary 8-bit portable graymap (`P5`) files.

use std::fs;
use std::path::Path;

use super::{GrayImage, LesionMask};
use crate::error::{Error, Result};

/// Decoded raster: `(height, width, samples)`.
pub type Raster = (usize, usize, Vec<u8>);

fn raster_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Raster {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Parses `P5` bytes. Samples are rescaled to 0..=255 when maxval is lower.
pub fn decode(bytes: &[u8]) -> std::result::Result<Raster, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic {:?}, expected P5", fields[0]));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("invalid {what} {s:?}"))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err("zero-sized raster".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} not in 1..=255"));
    }
    // exactly one whitespace byte separates the header from the samples
    if pos >= bytes.len() {
        return Err("missing sample data".into());
    }
    pos += 1;
    let n = width * height;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| format!("expected {n} samples, found {}", bytes.len() - pos))?;
    let samples = if maxval == 255 {
        data.to_vec()
    } else {
        data.iter()
            .map(|&v| ((v.min(maxval as u8) as f64) * 255.0 / maxval as f64).round() as u8)
            .collect()
    };
    Ok((height, width, samples))
}

pub fn encode(height: usize, width: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn read(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes).map_err(|m| raster_err(path, m))
}

pub fn write(path: &Path, height: usize, width: usize, samples: &[u8]) -> Result<()> {
    fs::write(path, encode(height, width, samples))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let (h, w, s) = read(path)?;
    GrayImage::from_u8(h, w, &s)
}

pub fn read_mask(path: &Path) -> Result<LesionMask> {
    let (h, w, s) = read(path)?;
    LesionMask::from_u8(h, w, &s)
}

pub fn write_image(path: &Path, image: &GrayImage) -> Result<()> {
    write(path, image.height(), image.width(), &image.to_u8())
}

pub fn write_mask(path: &Path, mask: &LesionMask) -> Result<()> {
    write(path, mask.height(), mask.width(), &mask.to_u8())
}
