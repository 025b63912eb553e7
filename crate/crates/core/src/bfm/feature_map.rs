use super::{check_same_dims, edt, extract_boundary, DistanceMap, GrayImage, LesionMask};
use crate::error::{Error, Result};

/// Gaussian width used when none is given, in pixels.
pub const DEFAULT_SIGMA: f64 = 20.0;

/// Per-pixel weights in `(0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl WeightMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Boundary-weighted image together with the width that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct BfmImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
    sigma: f64,
}

impl BfmImage {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.pixels.iter().map(|&v| v as f32).collect()
    }

    pub fn into_gray(self) -> GrayImage {
        GrayImage::new(self.height, self.width, self.pixels).expect("consistent dims")
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// `exp(-d^2 / sigma^2)` for every pixel of a distance map.
pub fn dtgf(dist: &DistanceMap, sigma: f64) -> Result<WeightMap> {
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    Ok(WeightMap {
        height: dist.height(),
        width: dist.width(),
        weights: dist
            .squared()
            .iter()
            .map(|&d2| (-(d2 as f64) / s2).exp())
            .collect(),
    })
}

/// Weights an image by the Gaussian of each pixel's distance to the lesion
/// contour.
pub fn make_bfm(image: &GrayImage, mask: &LesionMask, sigma: f64) -> Result<BfmImage> {
    check_sigma(sigma)?;
    check_same_dims(
        (image.height(), image.width()),
        (mask.height(), mask.width()),
    )?;
    let boundary = extract_boundary(mask)?;
    let dist = edt(&boundary, mask.height(), mask.width())?;
    let w = dtgf(&dist, sigma)?;
    Ok(BfmImage {
        height: image.height(),
        width: image.width(),
        pixels: image
            .pixels()
            .iter()
            .zip(w.weights())
            .map(|(&i, &w)| i * w)
            .collect(),
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfm::BoundarySet;

    fn point_distances(h: usize, w: usize) -> DistanceMap {
        edt(&BoundarySet::from_coords(vec![(0, 0)]).unwrap(), h, w).unwrap()
    }

    #[test]
    fn analytic_weights() {
        let d = point_distances(1, 41);
        let w = dtgf(&d, 20.0).unwrap();
        assert_eq!(w.weights()[0], 1.0);
        assert!((w.weights()[20] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w.weights()[40] - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sigma() {
        let d = point_distances(2, 2);
        for s in [0.0, -1.0, f64::NAN] {
            assert!(matches!(dtgf(&d, s), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn constant_image_gives_weight_map() {
        let mask = LesionMask::from_fn(9, 9, |r, c| (3..6).contains(&r) && (2..7).contains(&c));
        let img = GrayImage::filled(9, 9, 1.0);
        let bfm = make_bfm(&img, &mask, 3.0).unwrap();
        let b = extract_boundary(&mask).unwrap();
        let w = dtgf(&edt(&b, 9, 9).unwrap(), 3.0).unwrap();
        assert_eq!(bfm.pixels(), w.weights());
        assert_eq!(bfm.sigma(), 3.0);
    }

    #[test]
    fn dimension_mismatch() {
        let mask = LesionMask::from_fn(4, 4, |r, _| r == 1);
        let img = GrayImage::filled(4, 5, 1.0);
        assert!(matches!(make_bfm(&img, &mask, 2.0), Err(Error::Shape(_))));
    }
}
