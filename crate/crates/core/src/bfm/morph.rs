use super::{check_same_dims, LesionMask};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphOp {
    Dilate,
    Erode,
}

/// Result of a morphological operation. `emptied` is set when an erosion
/// removed every foreground pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphed {
    pub mask: LesionMask,
    pub emptied: bool,
}

fn disc(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// Binary dilation or erosion by the Euclidean disc of the given radius.
/// Disc offsets that fall outside the grid are ignored by both operations,
/// so a closing always contains the original mask.
pub fn morph(mask: &LesionMask, radius: usize, op: MorphOp) -> Morphed {
    let (h, w) = (mask.height() as isize, mask.width() as isize);
    let offsets = disc(radius);
    let on_grid = |r: isize, c: isize| r >= 0 && c >= 0 && r < h && c < w;
    let inside = |r: isize, c: isize| on_grid(r, c) && mask.get(r as usize, c as usize);
    let out = LesionMask::from_fn(mask.height(), mask.width(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        match op {
            MorphOp::Dilate => offsets.iter().any(|&(dy, dx)| inside(r + dy, c + dx)),
            MorphOp::Erode => offsets
                .iter()
                .all(|&(dy, dx)| !on_grid(r + dy, c + dx) || inside(r + dy, c + dx)),
        }
    });
    let emptied = op == MorphOp::Erode && !mask.is_empty() && out.is_empty();
    Morphed { mask: out, emptied }
}

/// `2|A∩B| / (|A|+|B|)`, and 1 when both masks are empty.
pub fn dice(a: &LesionMask, b: &LesionMask) -> Result<f64> {
    check_same_dims((a.height(), a.width()), (b.height(), b.width()))?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}
