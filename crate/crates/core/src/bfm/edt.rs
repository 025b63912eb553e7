//! Exact Euclidean distance transform.
//!
//! Two separable passes over integer squared distances: a column pass
//! giving the squared vertical distance to the nearest feature in each
//! column, then a row pass taking the lower envelope of the parabolas
//! `g(q) + (x - q)^2`. Envelope breakpoints are compared as exact
//! rationals, so the result equals the brute-force minimum bit for bit.

use super::BoundarySet;
use crate::error::{Error, Result};

/// Per-pixel distance to the nearest feature pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    height: usize,
    width: usize,
    squared: Vec<u64>,
}

impl DistanceMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Exact squared distances.
    pub fn squared(&self) -> &[u64] {
        &self.squared
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        (self.squared[row * self.width + col] as f64).sqrt()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.squared.iter().map(|&d| (d as f64).sqrt()).collect()
    }
}

const INF: i64 = i64::MAX / 4;

/// Distance from every pixel of a `height`×`width` grid to the nearest
/// boundary pixel.
pub fn edt(boundary: &BoundarySet, height: usize, width: usize) -> Result<DistanceMap> {
    if boundary.is_empty() {
        return Err(Error::domain("distance transform needs a non-empty boundary"));
    }
    if let Some(&(r, c)) = boundary
        .coords()
        .iter()
        .find(|&&(r, c)| r >= height || c >= width)
    {
        return Err(Error::shape(format!(
            "boundary pixel ({r},{c}) outside {height}x{width} grid"
        )));
    }

    let mut feature = vec![false; height * width];
    for &(r, c) in boundary.coords() {
        feature[r * width + c] = true;
    }

    // column pass: squared vertical distance to the nearest feature
    let mut g = vec![INF; height * width];
    let mut column = vec![INF; height];
    for c in 0..width {
        let mut last: Option<usize> = None;
        for r in 0..height {
            if feature[r * width + c] {
                last = Some(r);
            }
            column[r] = last.map_or(INF, |l| (r - l) as i64);
        }
        let mut next: Option<usize> = None;
        for r in (0..height).rev() {
            if feature[r * width + c] {
                next = Some(r);
            }
            if let Some(n) = next {
                column[r] = column[r].min((n - r) as i64);
            }
            g[r * width + c] = if column[r] >= INF {
                INF
            } else {
                column[r] * column[r]
            };
        }
    }

    // row pass: lower envelope of parabolas
    let mut squared = vec![0u64; height * width];
    let mut row_out = vec![0i64; width];
    for r in 0..height {
        lower_envelope(&g[r * width..(r + 1) * width], &mut row_out);
        for (dst, &v) in squared[r * width..(r + 1) * width].iter_mut().zip(&row_out) {
            *dst = v as u64;
        }
    }

    Ok(DistanceMap {
        height,
        width,
        squared,
    })
}

/// Breakpoint between the parabolas rooted at `v < q`, as `num / den` with
/// `den > 0`.
fn intersection(f: &[i64], v: usize, q: usize) -> (i64, i64) {
    let (vi, qi) = (v as i64, q as i64);
    ((f[q] + qi * qi) - (f[v] + vi * vi), 2 * (qi - vi))
}

/// `a/b <= c/d` for positive denominators.
fn le(a: (i64, i64), c: (i64, i64)) -> bool {
    (a.0 as i128) * (c.1 as i128) <= (c.0 as i128) * (a.1 as i128)
}

/// `out[x] = min_q f[q] + (x - q)^2` over finite `f[q]`. At least one entry
/// of every row is finite because the column pass reaches every column that
/// contains a feature, and there is at least one feature.
fn lower_envelope(f: &[i64], out: &mut [i64]) {
    let n = f.len();
    let mut v: Vec<usize> = Vec::with_capacity(n);
    // z[k] is the left breakpoint of parabola v[k]; z[0] is -inf
    let mut z: Vec<(i64, i64)> = Vec::with_capacity(n);
    for q in 0..n {
        if f[q] >= INF {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push((i64::MIN / 4, 1));
                    break;
                }
                Some(&top) => {
                    let s = intersection(f, top, q);
                    if v.len() > 1 && le(s, *z.last().unwrap()) {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(INF);
        return;
    }
    let mut k = 0;
    for (x, o) in out.iter_mut().enumerate() {
        let xi = x as i64;
        // advance while the next breakpoint lies strictly left of x
        while k + 1 < v.len() && (z[k + 1].0 as i128) < (xi as i128) * (z[k + 1].1 as i128) {
            k += 1;
        }
        let d = xi - v[k] as i64;
        *o = f[v[k]] + d * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let b = BoundarySet::from_coords(vec![(0, 0)]).unwrap();
        let d = edt(&b, 8, 8).unwrap();
        assert_eq!(d.get(3, 4), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn feature_pixels_are_zero() {
        let b = BoundarySet::from_coords(vec![(1, 1), (4, 6), (7, 2)]).unwrap();
        let d = edt(&b, 8, 8).unwrap();
        for &(r, c) in b.coords() {
            assert_eq!(d.squared()[r * 8 + c], 0);
        }
    }

    #[test]
    fn rejects_out_of_grid_boundary() {
        let b = BoundarySet::from_coords(vec![(9, 0)]).unwrap();
        assert!(matches!(edt(&b, 4, 4), Err(Error::Shape(_))));
    }
}
