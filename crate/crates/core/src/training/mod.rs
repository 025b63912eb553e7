//! Losses, the stopping rule and the optimization schedules.
//!
//! The multi-task objective is `λ·loss_c + (1−λ)·loss_r + γ·R`. In the
//! alternating schedule each batch takes a classification step
//! (`λ·loss_c + γ·R` over encoder and classifier) and then a
//! reconstruction step (`(1−λ)·loss_r + γ·R` over encoder and decoder),
//! each with its own Adam state. The joint schedule takes one step on the
//! whole objective. A task whose weight is zero is skipped outright, so its
//! head is never touched.

mod config;
mod log;

pub use config::{Schedule, TrainConfig, Variant};
pub use log::{EpochRecord, TrainLog};

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::Label;
use crate::network::{ArchitectureConfig, Group, Mode, SsdlModel};
use crate::tensor::{Adam, AdamConfig, ParamStore, Real, Tape, Tensor, Var};

/// One training image, flat `S*S`, with an optional label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub pixels: Vec<f32>,
    pub label: Option<Label>,
}

impl Example {
    pub fn labeled(pixels: Vec<f32>, label: Label) -> Self {
        Example {
            pixels,
            label: Some(label),
        }
    }

    pub fn unlabeled(pixels: Vec<f32>) -> Self {
        Example {
            pixels,
            label: None,
        }
    }
}

/// Batch mean of per-sample squared Euclidean distance.
pub fn loss_reconstruction<T: Real>(x: &Tensor<T>, x_hat: &Tensor<T>) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape(format!(
            "reconstruction {:?} does not match input {:?}",
            x_hat.shape(),
            x.shape()
        )));
    }
    let batch = if x.rank() >= 2 { x.shape()[0] } else { 1 };
    if batch == 0 {
        return Err(Error::shape("empty batch"));
    }
    let total: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum();
    Ok(total / batch as f64)
}

/// Batch mean of `-ln p[true class]`, probabilities floored at 1e-12.
pub fn loss_classification<T: Real>(y: &Tensor<T>, y_hat: &Tensor<T>) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.constant(y_hat.clone());
    let l = tape.cross_entropy(p, y)?;
    Ok(tape.scalar(l).as_f64())
}

/// Sum of squared weights (biases excluded) over the given groups, or all
/// parameters when `groups` is `None`.
pub fn regularizer<T: Real>(params: &ParamStore<T>, groups: Option<&[Group]>) -> f64 {
    params
        .iter()
        .filter(|p| p.is_weight())
        .filter(|p| match groups {
            None => true,
            Some(gs) => Group::of(p.name()).is_some_and(|g| gs.contains(&g)),
        })
        .flat_map(|p| p.value().data().iter())
        .map(|v| {
            let v = v.as_f64();
            v * v
        })
        .sum()
}

pub fn combined_objective(loss_c: f64, loss_r: f64, reg: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!("lambda must be in [0,1], got {lambda}")));
    }
    if !(gamma >= 0.0) {
        return Err(Error::param(format!("gamma must be non-negative, got {gamma}")));
    }
    Ok(lambda * loss_c + (1.0 - lambda) * loss_r + gamma * reg)
}

/// True when at least `2W` values exist and the mean of the last `W`
/// differs from the mean of the `W` before it by a relative amount below
/// `tol`.
pub fn stop_check(history: &[f64], window: usize, tol: f64) -> bool {
    if window == 0 || history.len() < 2 * window {
        return false;
    }
    let n = history.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let last = mean(&history[n - window..]);
    let prev = mean(&history[n - 2 * window..n - window]);
    (last - prev).abs() / prev.max(1e-12) < tol
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Step {
    Classify,
    Reconstruct,
    Joint,
}

/// Task weights inside a step.
#[derive(Clone, Copy, Debug)]
struct Weights {
    class: f64,
    recon: f64,
    gamma: f64,
}

struct StepOutcome {
    objective: f64,
    loss_c: Option<f64>,
    loss_r: Option<f64>,
    n_labeled: usize,
    n_all: usize,
}

fn to_t<T: Real>(v: f32) -> T {
    T::cast_from(v as f64)
}

fn input_tensor<T: Real>(model: &SsdlModel<T>, rows: &[&Example]) -> Result<Tensor<T>> {
    let s = model.config().input_side;
    let mut data = Vec::with_capacity(rows.len() * s * s);
    for e in rows {
        if e.pixels.len() != s * s {
            return Err(Error::shape(format!(
                "example has {} pixels, model expects {}",
                e.pixels.len(),
                s * s
            )));
        }
        data.extend(e.pixels.iter().map(|&v| to_t::<T>(v)));
    }
    Tensor::new(vec![rows.len(), 1, s, s], data)
}

fn one_hot<T: Real>(labels: &[Label]) -> Tensor<T> {
    let mut data = vec![T::zero(); labels.len() * 2];
    for (i, l) in labels.iter().enumerate() {
        data[i * 2 + l.index()] = T::one();
    }
    Tensor::new(vec![labels.len(), 2], data).expect("consistent shape")
}

/// Records the objective of one step on `tape`. Returns `None` when the
/// step has nothing to do.
fn build_objective<T: Real, R: Rng + ?Sized>(
    model: &SsdlModel<T>,
    tape: &mut Tape<T>,
    rows: &[&Example],
    step: Step,
    w: Weights,
    rng: &mut R,
) -> Result<Option<(Var, StepOutcome)>> {
    let labeled: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].label.is_some()).collect();
    let use_class = w.class > 0.0 && !labeled.is_empty() && step != Step::Reconstruct;
    let use_recon = w.recon > 0.0 && step != Step::Classify;
    if !use_class && !use_recon {
        return Ok(None);
    }

    // classification-only steps see just the labeled rows
    let batch_rows: Vec<&Example> = if use_recon {
        rows.to_vec()
    } else {
        labeled.iter().map(|&i| rows[i]).collect()
    };
    let x_t = input_tensor(model, &batch_rows)?;
    let x = tape.constant(x_t.clone());
    let h = model.encode(tape, x, Mode::Train, rng)?;

    let mut terms: Vec<Var> = Vec::new();
    let mut groups = vec![Group::Encoder];
    let (mut loss_c, mut loss_r) = (None, None);

    if use_class {
        let (hl, labels): (Var, Vec<Label>) = if use_recon {
            let hl = tape.select_rows(h, &labeled)?;
            (hl, labeled.iter().map(|&i| rows[i].label.expect("labeled")).collect())
        } else {
            (h, batch_rows.iter().map(|e| e.label.expect("labeled")).collect())
        };
        let p = model.classify(tape, hl)?;
        let lc = tape.cross_entropy(p, &one_hot(&labels))?;
        loss_c = Some(tape.scalar(lc).as_f64());
        terms.push(tape.scale(lc, w.class));
        groups.push(Group::Classifier);
    }
    if use_recon {
        let y = model.decode(tape, h)?;
        let lr = tape.squared_error(y, &x_t)?;
        loss_r = Some(tape.scalar(lr).as_f64());
        terms.push(tape.scale(lr, w.recon));
        groups.push(Group::Decoder);
    }
    if w.gamma > 0.0 {
        let mut weights = Vec::new();
        for p in model.params().iter() {
            if p.is_weight() && Group::of(p.name()).is_some_and(|g| groups.contains(&g)) {
                weights.push(tape.param(model.params(), p.name())?);
            }
        }
        let reg = tape.sum_squares(&weights);
        terms.push(tape.scale(reg, w.gamma));
    }
    let mut obj = terms[0];
    for &t in &terms[1..] {
        obj = tape.add(obj, t)?;
    }
    let outcome = StepOutcome {
        objective: tape.scalar(obj).as_f64(),
        loss_c,
        loss_r,
        n_labeled: labeled.len(),
        n_all: rows.len(),
    };
    Ok(Some((obj, outcome)))
}

fn take_step<T: Real, R: Rng + ?Sized>(
    model: &mut SsdlModel<T>,
    adam: &mut Adam,
    rows: &[&Example],
    step: Step,
    w: Weights,
    rng: &mut R,
) -> Result<Option<StepOutcome>> {
    let mut tape = Tape::new();
    let Some((obj, outcome)) = build_objective(model, &mut tape, rows, step, w, rng)? else {
        return Ok(None);
    };
    model.params_mut().zero_grad();
    tape.backward_into(obj, model.params_mut())?;
    adam.step(model.params_mut());
    Ok(Some(outcome))
}

/// Multi-task objective of one batch in train mode, without updating.
pub fn batch_objective<T: Real, R: Rng + ?Sized>(
    model: &SsdlModel<T>,
    rows: &[&Example],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let mut tape = Tape::new();
    let w = Weights {
        class: cfg.lambda,
        recon: 1.0 - cfg.lambda,
        gamma: cfg.gamma,
    };
    Ok(build_objective(model, &mut tape, rows, Step::Joint, w, rng)?
        .map(|(_, o)| o.objective)
        .unwrap_or(0.0))
}

/// One joint-schedule update on a fixed batch. Returns the objective
/// before the update.
pub fn joint_step<T: Real, R: Rng + ?Sized>(
    model: &mut SsdlModel<T>,
    adam: &mut Adam,
    rows: &[&Example],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    let w = Weights {
        class: cfg.lambda,
        recon: 1.0 - cfg.lambda,
        gamma: cfg.gamma,
    };
    Ok(take_step(model, adam, rows, Step::Joint, w, rng)?
        .map(|o| o.objective)
        .unwrap_or(0.0))
}

/// Eval-mode accuracy over the labeled examples.
pub fn accuracy<T: Real>(model: &SsdlModel<T>, data: &[Example]) -> Result<f64> {
    let labeled: Vec<&Example> = data.iter().filter(|e| e.label.is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::domain("no labeled examples"));
    }
    let probs = predict(model, &labeled)?;
    let correct = probs
        .iter()
        .zip(&labeled)
        .filter(|(p, e)| Some(Label::from_probs(**p)) == e.label)
        .count();
    Ok(correct as f64 / labeled.len() as f64)
}

/// Eval-mode class probabilities.
pub fn predict<T: Real>(model: &SsdlModel<T>, rows: &[&Example]) -> Result<Vec<[f64; 2]>> {
    let converted: Vec<Vec<T>> = rows
        .iter()
        .map(|e| e.pixels.iter().map(|&v| to_t::<T>(v)).collect())
        .collect();
    let refs: Vec<&[T]> = converted.iter().map(Vec::as_slice).collect();
    model.predict_proba(&refs)
}

/// Which loss drives the stopping rule.
#[derive(Clone, Copy, PartialEq)]
enum StopOn {
    Reconstruction,
    Classification,
}

#[allow(clippy::too_many_arguments)]
fn run_epochs<T: Real>(
    model: &mut SsdlModel<T>,
    data: &[Example],
    cfg: &TrainConfig,
    w: Weights,
    schedule: Schedule,
    stop_on: StopOn,
    rng: &mut ChaCha8Rng,
    log: &mut TrainLog,
) -> Result<()> {
    let adam_cfg = AdamConfig::with_lr(cfg.lr);
    let mut adam_a = Adam::new(adam_cfg)?;
    let mut adam_b = Adam::new(adam_cfg)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    let first_epoch = log.records.len() + 1;

    for epoch in first_epoch..first_epoch + cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(rng);
        let (mut sum_c, mut n_c, mut sum_r, mut n_r) = (0.0, 0usize, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let rows: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
            let outcomes = match schedule {
                Schedule::Alternating => {
                    let mut wa = w;
                    wa.recon = 0.0;
                    let mut wb = w;
                    wb.class = 0.0;
                    let a = take_step(model, &mut adam_a, &rows, Step::Classify, wa, rng)?;
                    let b = take_step(model, &mut adam_b, &rows, Step::Reconstruct, wb, rng)?;
                    vec![a, b]
                }
                Schedule::Joint => vec![take_step(model, &mut adam_a, &rows, Step::Joint, w, rng)?],
            };
            for o in outcomes.into_iter().flatten() {
                if let Some(lc) = o.loss_c {
                    sum_c += lc * o.n_labeled as f64;
                    n_c += o.n_labeled;
                }
                if let Some(lr) = o.loss_r {
                    sum_r += lr * o.n_all as f64;
                    n_r += o.n_all;
                }
            }
        }
        let loss_c = (n_c > 0).then(|| sum_c / n_c as f64);
        let loss_r = (n_r > 0).then(|| sum_r / n_r as f64);
        let train_acc = Some(accuracy(model, data)?);
        log.records.push(EpochRecord {
            epoch,
            loss_r,
            loss_c,
            train_acc,
            wall_ms: start.elapsed().as_millis() as u64,
        });
        let tracked = match stop_on {
            StopOn::Reconstruction => loss_r.or(loss_c),
            StopOn::Classification => loss_c,
        };
        if let Some(v) = tracked {
            history.push(v);
        }
        if stop_check(&history, cfg.stop_window, cfg.stop_rel_tol) {
            log.stopped_early = true;
            break;
        }
    }
    Ok(())
}

fn check_data(data: &[Example]) -> Result<()> {
    if !data.iter().any(|e| e.label.is_some()) {
        return Err(Error::domain("training needs at least one labeled example"));
    }
    Ok(())
}

/// Multi-task training of the shared-encoder model. Unlabeled examples
/// only enter reconstruction terms.
pub fn ssdl_fit<T: Real>(
    model: &mut SsdlModel<T>,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_data(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainLog::default();
    let w = Weights {
        class: cfg.lambda,
        recon: 1.0 - cfg.lambda,
        gamma: cfg.gamma,
    };
    run_epochs(model, data, cfg, w, cfg.schedule, StopOn::Reconstruction, &mut rng, &mut log)?;
    Ok(log)
}

/// Reconstruction training followed by supervised training of encoder and
/// classifier. `stage1_epochs` in the log counts the records of the first
/// stage.
pub fn scae_fit_two_stage<T: Real>(
    model: &mut SsdlModel<T>,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_data(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainLog::default();
    let stage1 = Weights {
        class: 0.0,
        recon: 1.0,
        gamma: cfg.gamma,
    };
    run_epochs(model, data, cfg, stage1, Schedule::Alternating, StopOn::Reconstruction, &mut rng, &mut log)?;
    log.stage1_epochs = Some(log.records.len());
    log.stopped_early = false;
    let stage2 = Weights {
        class: 1.0,
        recon: 0.0,
        gamma: cfg.gamma,
    };
    let labeled: Vec<Example> = data.iter().filter(|e| e.label.is_some()).cloned().collect();
    run_epochs(model, &labeled, cfg, stage2, Schedule::Alternating, StopOn::Classification, &mut rng, &mut log)?;
    Ok(log)
}

/// Trains with the schedule the variant calls for.
pub fn fit_variant<T: Real>(
    model: &mut SsdlModel<T>,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    if cfg.variant.is_scae() {
        scae_fit_two_stage(model, data, cfg)
    } else {
        ssdl_fit(model, data, cfg)
    }
}

/// Loads a checkpoint, checks it against `arch`, and continues training
/// with fresh optimizer state.
pub fn fine_tune(
    checkpoint: &Path,
    arch: &ArchitectureConfig,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<(SsdlModel<f32>, TrainLog)> {
    let mut model = crate::network::load_checkpoint_for(checkpoint, arch)?;
    let mut log = fit_variant(&mut model, data, cfg)?;
    log.warm_start = true;
    Ok((model, log))
}

/// Like [`fine_tune`] but starting from an in-memory model.
pub fn fine_tune_model<T: Real>(
    model: &mut SsdlModel<T>,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    let mut log = fit_variant(model, data, cfg)?;
    log.warm_start = true;
    Ok(log)
}

/// Names of parameters whose values differ between two stores.
pub fn changed_parameters<T: Real>(a: &ParamStore<T>, b: &ParamStore<T>) -> BTreeSet<String> {
    a.iter()
        .filter(|p| {
            b.get(p.name()).is_none_or(|q| {
                p.value()
                    .data()
                    .iter()
                    .zip(q.value().data())
                    .any(|(x, y)| x.as_f64().to_bits() != y.as_f64().to_bits())
            })
        })
        .map(|p| p.name().to_string())
        .collect()
}
