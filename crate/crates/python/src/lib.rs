//! Python bindings: synthetic data, boundary feature maps, the network and
//! the experiment workflows.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use birads_ssdl::bfm::{self, GrayImage, LesionMask};
use birads_ssdl::evaluation::{self, ConfusionCounts, Label, MetricsReport, METRIC_COLUMNS};
use birads_ssdl::harness::{self, ExperimentSpec, SynthConfig, Workflow};
use birads_ssdl::network::{self, ArchitectureConfig, SsdlModel};
use birads_ssdl::training::{self, Example, Schedule, TrainConfig, Variant};
use birads_ssdl::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Shape(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

fn label_of(v: Option<u8>) -> PyResult<Option<Label>> {
    match v {
        None => Ok(None),
        Some(i) => Label::from_index(i as usize)
            .map(Some)
            .ok_or_else(|| PyValueError::new_err(format!("label must be 0, 1 or None, got {i}"))),
    }
}

fn report_dict(r: &MetricsReport) -> BTreeMap<String, Option<f64>> {
    METRIC_COLUMNS
        .iter()
        .zip(r.values())
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn image(pixels: Vec<f64>, height: usize, width: usize) -> PyResult<GrayImage> {
    GrayImage::new(height, width, pixels).map_err(py_err)
}

fn mask(bits: Vec<bool>, height: usize, width: usize) -> PyResult<LesionMask> {
    LesionMask::new(height, width, bits).map_err(py_err)
}

/// Writes a synthetic dataset, one block per tag, and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, n_benign=80, n_malignant=80, n_unlabeled=0, side=64, seed=0, speckle=0.2, tags=vec!["A".to_string()]))]
#[allow(clippy::too_many_arguments)]
fn synth(
    out_dir: PathBuf,
    n_benign: usize,
    n_malignant: usize,
    n_unlabeled: usize,
    side: usize,
    seed: u64,
    speckle: f64,
    tags: Vec<String>,
) -> PyResult<PathBuf> {
    let cfgs: Vec<SynthConfig> = tags
        .into_iter()
        .enumerate()
        .map(|(i, tag)| SynthConfig {
            n_benign,
            n_malignant,
            n_unlabeled,
            side,
            seed: seed.wrapping_add(i as u64),
            speckle_strength: speckle,
            dataset_tag: tag,
            ..SynthConfig::default()
        })
        .collect();
    harness::synth_generate_many(&cfgs, &out_dir).map_err(py_err)
}

/// Samples of a manifest cropped to `side`, as dicts with flat pixel lists.
#[pyfunction]
fn load_samples(manifest: PathBuf, side: usize) -> PyResult<Vec<BTreeMap<String, Py<PyAny>>>> {
    let m = harness::load_manifest(&manifest).map_err(py_err)?;
    let samples = harness::load_samples(&m, side).map_err(py_err)?;
    Python::attach(|py| {
        samples
            .into_iter()
            .map(|s| {
                let mut d: BTreeMap<String, Py<PyAny>> = BTreeMap::new();
                d.insert("id".into(), s.id.into_pyobject(py)?.into_any().unbind());
                d.insert("label".into(), s.label.map(|l| l.index()).into_pyobject(py)?.into_any().unbind());
                d.insert("split".into(), s.split.as_str().into_pyobject(py)?.into_any().unbind());
                d.insert("tag".into(), s.tag.into_pyobject(py)?.into_any().unbind());
                d.insert("image".into(), s.image.pixels().to_vec().into_pyobject(py)?.into_any().unbind());
                d.insert("mask".into(), s.mask.bits().to_vec().into_pyobject(py)?.into_any().unbind());
                Ok(d)
            })
            .collect()
    })
}

/// Squared distance from every pixel to the mask boundary.
#[pyfunction]
fn edt_squared(mask_bits: Vec<bool>, height: usize, width: usize) -> PyResult<Vec<u64>> {
    let m = mask(mask_bits, height, width)?;
    let b = bfm::extract_boundary(&m).map_err(py_err)?;
    Ok(bfm::edt(&b, height, width).map_err(py_err)?.squared().to_vec())
}

/// Boundary feature map with `sigma` in pixels.
#[pyfunction]
#[pyo3(signature = (pixels, mask_bits, height, width, sigma=bfm::DEFAULT_SIGMA))]
fn make_bfm(pixels: Vec<f64>, mask_bits: Vec<bool>, height: usize, width: usize, sigma: f64) -> PyResult<Vec<f64>> {
    let out = bfm::make_bfm(&image(pixels, height, width)?, &mask(mask_bits, height, width)?, sigma).map_err(py_err)?;
    Ok(out.pixels().to_vec())
}

/// Boundary-map width for an input side, from a width at the 512-pixel scale.
#[pyfunction]
fn sigma_at_side(sigma: f64, side: usize) -> f64 {
    harness::sigma_at_side(sigma, side)
}

#[pyfunction]
#[pyo3(signature = (tp, fn_, tn, fp))]
fn metrics(tp: u64, fn_: u64, tn: u64, fp: u64) -> BTreeMap<String, Option<f64>> {
    report_dict(&evaluation::metrics_from_confusion(&ConfusionCounts { tp, fn_, tn, fp }))
}

/// Area under the ROC curve; labels are 0 (benign) or 1 (malignant).
#[pyfunction]
fn roc_auc(labels: Vec<u8>, scores: Vec<f64>) -> PyResult<f64> {
    let labels: Vec<Label> = labels
        .into_iter()
        .map(|l| label_of(Some(l)).map(|x| x.expect("some")))
        .collect::<PyResult<_>>()?;
    evaluation::roc_auc(&labels, &scores).map_err(py_err)
}

/// Runs an experiment workflow and returns the written CSV paths.
#[pyfunction]
#[pyo3(signature = (manifest, workflow, out_dir, side=64, repeats=5, epochs=100, variants=None, tags=None, seed=0, sigma=bfm::DEFAULT_SIGMA))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    manifest: PathBuf,
    workflow: &str,
    out_dir: PathBuf,
    side: usize,
    repeats: usize,
    epochs: usize,
    variants: Option<Vec<String>>,
    tags: Option<Vec<String>>,
    seed: u64,
    sigma: f64,
) -> PyResult<Vec<PathBuf>> {
    let mut spec = ExperimentSpec::new(parse::<Workflow>(workflow)?, out_dir);
    if let Some(v) = variants {
        spec.variants = v.iter().map(|s| parse(s)).collect::<PyResult<_>>()?;
    }
    spec.arch = ArchitectureConfig::with_side(side);
    spec.repeats = repeats;
    spec.train.max_epochs = epochs;
    spec.train.seed = seed;
    spec.sigma = sigma;
    spec.tags = tags.unwrap_or_default();
    let out = harness::run_experiment_at(&spec, &manifest).map_err(py_err)?;
    Ok(out.tables.into_iter().map(|(p, _)| p).collect())
}

/// The shared-encoder network with its reconstruction and classification heads.
#[pyclass(name = "Model")]
struct PyModel {
    inner: SsdlModel<f32>,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (side=64, seed=0))]
    fn new(side: usize, seed: u64) -> PyResult<Self> {
        let inner = SsdlModel::build(ArchitectureConfig::with_side(side), seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: network::load_checkpoint(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        network::save_checkpoint(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.config().input_side
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Class probabilities `[p_benign, p_malignant]` per flat image.
    fn predict_proba(&self, images: Vec<Vec<f32>>) -> PyResult<Vec<[f64; 2]>> {
        let refs: Vec<&[f32]> = images.iter().map(Vec::as_slice).collect();
        self.inner.predict_proba(&refs).map_err(py_err)
    }

    /// Trains in place; `labels` holds 0, 1 or None for unlabeled rows.
    /// Returns one dict per epoch.
    #[pyo3(signature = (images, labels, variant="birads-ssdl", epochs=100, lr=3e-4, lambda_=0.5, gamma=1e-4, batch=16, seed=0, schedule="alternating"))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        images: Vec<Vec<f32>>,
        labels: Vec<Option<u8>>,
        variant: &str,
        epochs: usize,
        lr: f64,
        lambda_: f64,
        gamma: f64,
        batch: usize,
        seed: u64,
        schedule: &str,
    ) -> PyResult<Vec<BTreeMap<String, Option<f64>>>> {
        if images.len() != labels.len() {
            return Err(PyValueError::new_err(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let data: Vec<Example> = images
            .into_iter()
            .zip(labels)
            .map(|(pixels, l)| Ok(Example { pixels, label: label_of(l)? }))
            .collect::<PyResult<_>>()?;
        let cfg = TrainConfig {
            lambda: lambda_,
            gamma,
            lr,
            batch_size: batch,
            max_epochs: epochs,
            seed,
            schedule: parse::<Schedule>(schedule)?,
            variant: parse::<Variant>(variant)?,
            ..TrainConfig::default()
        };
        let log = training::fit_variant(&mut self.inner, &data, &cfg).map_err(py_err)?;
        Ok(log
            .records
            .iter()
            .map(|r| {
                BTreeMap::from([
                    ("epoch".to_string(), Some(r.epoch as f64)),
                    ("loss_r".to_string(), r.loss_r),
                    ("loss_c".to_string(), r.loss_c),
                    ("train_acc".to_string(), r.train_acc),
                ])
            })
            .collect())
    }

    /// Test metrics as fractions.
    fn evaluate(&self, images: Vec<Vec<f32>>, labels: Vec<u8>) -> PyResult<BTreeMap<String, Option<f64>>> {
        let data: Vec<Example> = images
            .into_iter()
            .zip(labels)
            .map(|(pixels, l)| Ok(Example { pixels, label: label_of(Some(l))? }))
            .collect::<PyResult<_>>()?;
        Ok(report_dict(&harness::evaluate_model(&self.inner, &data).map_err(py_err)?))
    }
}

#[pymodule]
fn bssdl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(load_samples, m)?)?;
    m.add_function(wrap_pyfunction!(edt_squared, m)?)?;
    m.add_function(wrap_pyfunction!(make_bfm, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_at_side, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyModel>()?;
    m.add("DEFAULT_SIGMA", bfm::DEFAULT_SIGMA)?;
    Ok(())
}
