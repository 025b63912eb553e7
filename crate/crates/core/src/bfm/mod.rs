//! Boundary-weighted feature maps.
//!
//! An image is weighted by a Gaussian of each pixel's Euclidean distance to
//! the lesion contour, so the band around the boundary keeps its intensity
//! while pixels far inside or outside the lesion fade out. The module also
//! carries the binary morphology and overlap score used to study how
//! boundary errors propagate into classification.

mod boundary;
mod crop;
mod edt;
mod feature_map;
mod morph;
pub mod pgm;

pub use boundary::{extract_boundary, BoundarySet};
pub use crop::center_crop_pad;
pub use edt::{edt, DistanceMap};
pub use feature_map::{dtgf, make_bfm, BfmImage, WeightMap, DEFAULT_SIGMA};
pub use morph::{dice, morph, MorphOp, Morphed};

use crate::error::{Error, Result};

/// Grayscale intensities, row-major, nominally in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        GrayImage {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    /// 8-bit samples mapped to `value / 255`.
    pub fn from_u8(height: usize, width: usize, samples: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            samples.iter().map(|&v| v as f64 / 255.0).collect(),
        )
    }

    /// Quantizes back to 8 bits, clamping to `[0,1]` first.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Pixels as `f32` network input.
    pub fn to_f32(&self) -> Vec<f32> {
        self.pixels.iter().map(|&v| v as f32).collect()
    }
}

/// Binary lesion membership on the same grid as its image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LesionMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl LesionMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} mask needs {} entries, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(LesionMask {
            height,
            width,
            bits,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        LesionMask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        LesionMask {
            height,
            width,
            bits,
        }
    }

    /// Samples of 128 and above are foreground.
    pub fn from_u8(height: usize, width: usize, samples: &[u8]) -> Result<Self> {
        Self::new(height, width, samples.iter().map(|&v| v >= 128).collect())
    }

    /// Foreground 255, background 0.
    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Mean (row, col) of the foreground, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    sr += r as f64;
                    sc += c as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }
}

pub(crate) fn check_same_dims(
    (h1, w1): (usize, usize),
    (h2, w2): (usize, usize),
) -> Result<()> {
    if (h1, w1) != (h2, w2) {
        return Err(Error::shape(format!(
            "dimension mismatch: {h1}x{w1} vs {h2}x{w2}"
        )));
    }
    Ok(())
}
