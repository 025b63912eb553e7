//! Loaded samples, per-tag partitions and content-addressed BFM caching.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::manifest::{Manifest, Split};
use crate::bfm::{center_crop_pad, make_bfm, pgm, GrayImage, LesionMask};
use crate::error::{Error, Result};
use crate::evaluation::{stratified_split, Label};
use crate::training::{Example, Variant};

/// A manifest row with its rasters cropped to the model's input side.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: Option<Label>,
    pub split: Split,
    pub tag: String,
    pub image: GrayImage,
    pub mask: LesionMask,
}

pub fn load_samples(manifest: &Manifest, side: usize) -> Result<Vec<Sample>> {
    manifest
        .records
        .iter()
        .map(|r| {
            let image = pgm::read_image(&manifest.resolve(&r.image_path))?;
            let mask = pgm::read_mask(&manifest.resolve(&r.mask_path))?;
            let (image, mask) = center_crop_pad(&image, &mask, side)
                .map_err(|e| Error::domain(format!("sample {}: {e}", r.id)))?;
            Ok(Sample {
                id: r.id.clone(),
                label: r.label.label(),
                split: r.split,
                tag: r.dataset_tag.clone(),
                image,
                mask,
            })
        })
        .collect()
}

/// Indices into the sample list. Unlabeled samples always train.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits the samples of one tag. Manifest splits are used when every row
/// of the tag has one; otherwise labeled rows are split stratified by class
/// with `train_fraction` going to training.
pub fn partition_tag(samples: &[Sample], tag: &str, train_fraction: f64, seed: u64) -> Result<Partition> {
    let rows: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].tag == tag).collect();
    if rows.is_empty() {
        return Err(Error::Config(format!("dataset tag {tag:?} not present in the manifest")));
    }
    let explicit = rows.iter().filter(|&&i| samples[i].split != Split::None).count();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if explicit == rows.len() {
        for &i in &rows {
            match (samples[i].split, samples[i].label) {
                (Split::Test, None) => {
                    return Err(Error::domain(format!("unlabeled sample {} is in the test split", samples[i].id)))
                }
                (Split::Test, Some(_)) => test.push(i),
                _ => train.push(i),
            }
        }
    } else if explicit == 0 {
        let labeled: Vec<usize> = rows.iter().copied().filter(|&i| samples[i].label.is_some()).collect();
        let labels: Vec<Label> = labeled.iter().map(|&i| samples[i].label.expect("labeled")).collect();
        let (tr, te) = stratified_split(&labels, train_fraction, seed)
            .map_err(|e| Error::domain(format!("tag {tag:?}: {e}")))?;
        train.extend(tr.iter().map(|&k| labeled[k]));
        test.extend(te.iter().map(|&k| labeled[k]));
        train.extend(rows.iter().copied().filter(|&i| samples[i].label.is_none()));
        train.sort_unstable();
    } else {
        return Err(Error::Config(format!(
            "tag {tag:?} mixes explicit and unassigned splits"
        )));
    }
    for class in Label::ALL {
        if !test.iter().any(|&i| samples[i].label == Some(class)) {
            return Err(Error::domain(format!(
                "tag {tag:?}: insufficient samples, test split has no {class} case"
            )));
        }
        if !train.iter().any(|&i| samples[i].label == Some(class)) {
            return Err(Error::domain(format!(
                "tag {tag:?}: insufficient samples, train split has no {class} case"
            )));
        }
    }
    Ok(Partition { train, test })
}

/// The boundary-map width for a given input side, with `sigma` stated at
/// the 512-pixel reference scale.
pub fn sigma_at_side(sigma: f64, side: usize) -> f64 {
    sigma * side as f64 / 512.0
}

pub fn image_digest(image: &GrayImage) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"image");
    h.update((image.height() as u64).to_le_bytes());
    h.update((image.width() as u64).to_le_bytes());
    for p in image.pixels() {
        h.update(p.to_le_bytes());
    }
    h.finalize().into()
}

pub fn mask_digest(mask: &LesionMask) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"mask");
    h.update((mask.height() as u64).to_le_bytes());
    h.update((mask.width() as u64).to_le_bytes());
    h.update(mask.bits().iter().map(|&b| b as u8).collect::<Vec<u8>>());
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// In-memory BFM store keyed by (image digest, mask digest, sigma).
#[derive(Debug, Default)]
pub struct BfmCache {
    entries: HashMap<[u8; 32], Arc<Vec<f32>>>,
    hits: usize,
    misses: usize,
}

impl BfmCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn key(image: &GrayImage, mask: &LesionMask, sigma: f64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(image_digest(image));
        h.update(mask_digest(mask));
        h.update(sigma.to_bits().to_le_bytes());
        h.finalize().into()
    }

    pub fn get(&mut self, image: &GrayImage, mask: &LesionMask, sigma: f64) -> Result<Arc<Vec<f32>>> {
        let key = Self::key(image, mask, sigma);
        if let Some(v) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(Arc::clone(v));
        }
        let v = Arc::new(make_bfm(image, mask, sigma)?.to_f32());
        self.misses += 1;
        self.entries.insert(key, Arc::clone(&v));
        Ok(v)
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The network input for one sample: the raw image for `ori-*` variants,
/// the boundary feature map for `birads-*` ones.
pub fn model_input(
    image: &GrayImage,
    mask: &LesionMask,
    variant: Variant,
    sigma_px: f64,
    cache: &mut BfmCache,
) -> Result<Vec<f32>> {
    if variant.is_birads() {
        Ok(cache.get(image, mask, sigma_px)?.as_ref().clone())
    } else {
        Ok(image.to_f32())
    }
}

pub fn examples(
    samples: &[Sample],
    indices: &[usize],
    variant: Variant,
    sigma_px: f64,
    cache: &mut BfmCache,
) -> Result<Vec<Example>> {
    indices
        .iter()
        .map(|&i| {
            let s = &samples[i];
            Ok(Example {
                pixels: model_input(&s.image, &s.mask, variant, sigma_px, cache)?,
                label: s.label,
            })
        })
        .collect()
}

/// Digest of a list of network inputs, in order.
pub fn inputs_digest(examples: &[Example]) -> String {
    let mut h = Sha256::new();
    for e in examples {
        h.update((e.pixels.len() as u64).to_le_bytes());
        for p in &e.pixels {
            h.update(p.to_le_bytes());
        }
    }
    hex(&h.finalize())
}
