use super::LesionMask;
use crate::error::{Error, Result};

/// Contour pixels of a lesion as `(row, col)`, in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundarySet {
    coords: Vec<(usize, usize)>,
}

impl BoundarySet {
    /// Builds a set from arbitrary coordinates. Duplicates are removed and
    /// the result is sorted row-major.
    pub fn from_coords(mut coords: Vec<(usize, usize)>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("boundary set is empty"));
        }
        coords.sort_unstable();
        coords.dedup();
        Ok(BoundarySet { coords })
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn contains(&self, p: (usize, usize)) -> bool {
        self.coords.binary_search(&p).is_ok()
    }
}

/// Foreground pixels with at least one background 4-neighbour. Pixels on
/// the image border count as touching background.
pub fn extract_boundary(mask: &LesionMask) -> Result<BoundarySet> {
    let (h, w) = (mask.height(), mask.width());
    let mut coords = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let edge = r == 0
                || c == 0
                || r + 1 == h
                || c + 1 == w
                || !mask.get(r - 1, c)
                || !mask.get(r + 1, c)
                || !mask.get(r, c - 1)
                || !mask.get(r, c + 1);
            if edge {
                coords.push((r, c));
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::domain("mask has no foreground pixels"));
    }
    Ok(BoundarySet { coords })
}
