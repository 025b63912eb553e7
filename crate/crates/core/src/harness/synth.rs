//! Synthetic lesion images: smooth ellipses for benign cases, spiculated
//! star polygons for malignant ones.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{write_manifest, SampleLabel, SampleRecord, Split};
use crate::bfm::{pgm, GrayImage, LesionMask};
use crate::error::{Error, Result};
use crate::evaluation::Label;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_benign: usize,
    pub n_malignant: usize,
    pub side: usize,
    pub seed: u64,
    /// Standard deviation of the multiplicative speckle.
    pub speckle_strength: f64,
    /// Inclusive range of spike counts of malignant stars.
    pub spikes: (usize, usize),
    /// Range of relative spike amplitude of malignant stars.
    pub spike_amplitude: (f64, f64),
    /// Number of extra unlabeled samples, drawn from both classes.
    pub n_unlabeled: usize,
    /// Tag written into the manifest.
    pub dataset_tag: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_benign: 80,
            n_malignant: 80,
            side: 64,
            seed: 0,
            speckle_strength: 0.2,
            spikes: (5, 9),
            spike_amplitude: (0.25, 0.45),
            n_unlabeled: 0,
            dataset_tag: "A".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.side.is_power_of_two() || self.side < 8 {
            return Err(Error::Config(format!(
                "synthetic side must be a power of two >= 8, got {}",
                self.side
            )));
        }
        if !(self.speckle_strength >= 0.0) {
            return Err(Error::Config("speckle strength must be non-negative".into()));
        }
        if self.spikes.0 < 3 || self.spikes.0 > self.spikes.1 {
            return Err(Error::Config(format!("invalid spike range {:?}", self.spikes)));
        }
        let (a0, a1) = self.spike_amplitude;
        if !(0.0 <= a0 && a0 <= a1 && a1 < 1.0) {
            return Err(Error::Config(format!(
                "invalid spike amplitude range {:?}",
                self.spike_amplitude
            )));
        }
        if self.dataset_tag.is_empty() || self.dataset_tag.contains(['\t', '\n']) {
            return Err(Error::Config("dataset tag must be non-empty without tabs".into()));
        }
        Ok(())
    }
}

fn point_in_polygon(x: f64, y: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn lesion_mask<R: Rng>(rng: &mut R, label: Label, cfg: &SynthConfig) -> LesionMask {
    let s = cfg.side as f64;
    let jitter = 0.08 * s;
    let cy = s / 2.0 + rng.gen_range(-jitter..=jitter);
    let cx = s / 2.0 + rng.gen_range(-jitter..=jitter);
    let rot = rng.gen_range(0.0..PI);
    let mask = match label {
        Label::Benign => {
            let a = rng.gen_range(0.12..=0.24) * s;
            let b = rng.gen_range(0.12..=0.24) * s;
            let (sn, cs) = rot.sin_cos();
            LesionMask::from_fn(cfg.side, cfg.side, |r, c| {
                let dy = r as f64 + 0.5 - cy;
                let dx = c as f64 + 0.5 - cx;
                let u = dx * cs + dy * sn;
                let v = -dx * sn + dy * cs;
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            })
        }
        Label::Malignant => {
            let r0 = rng.gen_range(0.14..=0.22) * s;
            let k = rng.gen_range(cfg.spikes.0..=cfg.spikes.1);
            let (a0, a1) = cfg.spike_amplitude;
            let poly: Vec<(f64, f64)> = (0..2 * k)
                .map(|i| {
                    let amp = if a1 > a0 { rng.gen_range(a0..=a1) } else { a0 };
                    let radius = if i % 2 == 0 { r0 * (1.0 + amp) } else { r0 * (1.0 - amp) };
                    let theta = rot + PI * i as f64 / k as f64;
                    (cx + radius * theta.cos(), cy + radius * theta.sin())
                })
                .collect();
            LesionMask::from_fn(cfg.side, cfg.side, |r, c| {
                point_in_polygon(c as f64 + 0.5, r as f64 + 0.5, &poly)
            })
        }
    };
    if mask.is_empty() {
        // degenerate draw at tiny sides: fall back to the centre pixel
        LesionMask::from_fn(cfg.side, cfg.side, |r, c| r == cfg.side / 2 && c == cfg.side / 2)
    } else {
        mask
    }
}

/// One image/mask pair. Intensities are quantized to 8 bits so the
/// in-memory result equals what a round trip through files yields.
pub fn synth_sample<R: Rng>(rng: &mut R, label: Label, cfg: &SynthConfig) -> (GrayImage, LesionMask) {
    let mask = lesion_mask(rng, label, cfg);
    let s = cfg.side as f64;
    let (fy, fx) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    let (py, px) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let base = rng.gen_range(0.5..0.65);
    let offset = rng.gen_range(0.25..0.35);
    let speckle = Normal::new(1.0, cfg.speckle_strength).expect("finite std");
    let mut samples = Vec::with_capacity(cfg.side * cfg.side);
    for r in 0..cfg.side {
        for c in 0..cfg.side {
            let bg = base
                + 0.08 * (2.0 * PI * fy * r as f64 / s + py).sin() * (2.0 * PI * fx * c as f64 / s + px).cos();
            let v = if mask.get(r, c) { bg - offset } else { bg };
            let v = (v * speckle.sample(rng)).clamp(0.0, 1.0);
            samples.push((v * 255.0).round() as u8);
        }
    }
    let image = GrayImage::from_u8(cfg.side, cfg.side, &samples).expect("consistent dims");
    (image, mask)
}

/// A generated sample held in memory.
#[derive(Clone, Debug)]
pub struct SynthSample {
    pub id: String,
    pub label: Option<Label>,
    pub image: GrayImage,
    pub mask: LesionMask,
}

/// Benign samples first, then malignant, then unlabeled, all from one
/// stream seeded by `cfg.seed`.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<SynthSample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    let plan = std::iter::repeat_n(Some(Label::Benign), cfg.n_benign)
        .chain(std::iter::repeat_n(Some(Label::Malignant), cfg.n_malignant))
        .chain(std::iter::repeat_n(None, cfg.n_unlabeled));
    for (i, label) in plan.enumerate() {
        let drawn = label.unwrap_or_else(|| {
            if rng.gen_bool(0.5) {
                Label::Malignant
            } else {
                Label::Benign
            }
        });
        let (image, mask) = synth_sample(&mut rng, drawn, cfg);
        out.push(SynthSample {
            id: format!("{}{:04}", cfg.dataset_tag, i),
            label,
            image,
            mask,
        });
    }
    Ok(out)
}

/// Writes rasters under `out_dir/images` and `out_dir/masks` plus
/// `out_dir/manifest.tsv`, and returns the manifest path.
pub fn synth_generate(cfg: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    synth_generate_many(std::slice::from_ref(cfg), out_dir)
}

/// Like [`synth_generate`] for several datasets sharing one manifest.
/// Their tags must be distinct.
pub fn synth_generate_many(cfgs: &[SynthConfig], out_dir: &Path) -> Result<PathBuf> {
    for (i, c) in cfgs.iter().enumerate() {
        if cfgs[..i].iter().any(|d| d.dataset_tag == c.dataset_tag) {
            return Err(Error::Config(format!("duplicate dataset tag {:?}", c.dataset_tag)));
        }
    }
    for sub in ["images", "masks"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(format!("creating {}", d.display()), e))?;
    }
    let mut records = Vec::new();
    for cfg in cfgs {
        for s in synth_dataset(cfg)? {
            let image_rel = PathBuf::from("images").join(format!("{}.pgm", s.id));
            let mask_rel = PathBuf::from("masks").join(format!("{}.pgm", s.id));
            pgm::write_image(&out_dir.join(&image_rel), &s.image)?;
            pgm::write_mask(&out_dir.join(&mask_rel), &s.mask)?;
            records.push(SampleRecord {
                id: s.id,
                image_path: image_rel,
                mask_path: mask_rel,
                label: s.label.map_or(SampleLabel::Unlabeled, SampleLabel::from),
                split: Split::None,
                dataset_tag: cfg.dataset_tag.clone(),
            });
        }
    }
    let path = out_dir.join("manifest.tsv");
    write_manifest(&path, &records)?;
    Ok(path)
}

/// `perimeter^2 / area` with the perimeter taken as the number of contour
/// pixels.
pub fn roughness(mask: &LesionMask) -> Option<f64> {
    let b = crate::bfm::extract_boundary(mask).ok()?;
    Some((b.len() as f64).powi(2) / mask.count() as f64)
}
