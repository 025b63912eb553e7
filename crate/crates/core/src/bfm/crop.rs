use super::{check_same_dims, GrayImage, LesionMask};
use crate::error::{Error, Result};

/// `side`×`side` window centred on the rounded lesion centroid. The centroid
/// lands on index `side / 2` of the window; anything outside the source is
/// zero in both the image and the mask.
pub fn center_crop_pad(
    image: &GrayImage,
    mask: &LesionMask,
    side: usize,
) -> Result<(GrayImage, LesionMask)> {
    if side == 0 {
        return Err(Error::param("crop side must be at least 1"));
    }
    check_same_dims(
        (image.height(), image.width()),
        (mask.height(), mask.width()),
    )?;
    let (cr, cc) = mask
        .centroid()
        .ok_or_else(|| Error::domain("cannot crop around an empty mask"))?;
    let top = cr.round() as isize - (side / 2) as isize;
    let left = cc.round() as isize - (side / 2) as isize;
    let (h, w) = (image.height() as isize, image.width() as isize);

    let mut pixels = vec![0.0; side * side];
    let mut bits = vec![false; side * side];
    for r in 0..side {
        let sr = top + r as isize;
        if sr < 0 || sr >= h {
            continue;
        }
        for c in 0..side {
            let sc = left + c as isize;
            if sc < 0 || sc >= w {
                continue;
            }
            pixels[r * side + c] = image.get(sr as usize, sc as usize);
            bits[r * side + c] = mask.get(sr as usize, sc as usize);
        }
    }
    Ok((
        GrayImage::new(side, side, pixels)?,
        LesionMask::new(side, side, bits)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_already_centred() {
        for side in [4usize, 5] {
            let lo = side / 2 - 1;
            let hi = side - lo - 1;
            let mask = LesionMask::from_fn(side, side, |r, c| {
                (lo..=hi).contains(&r) && (lo..=hi).contains(&c)
            });
            let img = GrayImage::new(
                side,
                side,
                (0..side * side).map(|i| i as f64 / 100.0).collect(),
            )
            .unwrap();
            let (ci, cm) = center_crop_pad(&img, &mask, side).unwrap();
            assert_eq!(ci, img);
            assert_eq!(cm, mask);
        }
    }

    #[test]
    fn empty_mask_is_domain_error() {
        let img = GrayImage::filled(4, 4, 0.5);
        assert!(matches!(
            center_crop_pad(&img, &LesionMask::empty(4, 4), 2),
            Err(Error::Domain(_))
        ));
    }
}
