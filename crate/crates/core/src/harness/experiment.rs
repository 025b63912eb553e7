//! The five experiment workflows and their CSV reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::data::{
    examples, inputs_digest, load_samples, model_input, partition_tag, sigma_at_side, BfmCache, Partition, Sample,
};
use super::manifest::Manifest;
use crate::bfm::{dice, morph, MorphOp, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate_runs, evaluate_scores, Label, MetricsReport, METRIC_COLUMNS};
use crate::network::{save_checkpoint, ArchitectureConfig, SsdlModel};
use crate::report::{emit_report, format_number, format_opt, Table};
use crate::training::{fine_tune, fit_variant, predict, Example, TrainConfig, TrainLog, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workflow {
    Single,
    Cross,
    Pretrain,
    Boundary,
    SigmaSweep,
}

impl Workflow {
    pub const ALL: [Workflow; 5] = [
        Workflow::Single,
        Workflow::Cross,
        Workflow::Pretrain,
        Workflow::Boundary,
        Workflow::SigmaSweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Workflow::Single => "single",
            Workflow::Cross => "cross",
            Workflow::Pretrain => "pretrain",
            Workflow::Boundary => "boundary",
            Workflow::SigmaSweep => "sigma-sweep",
        }
    }

    fn default_variants(self) -> Vec<Variant> {
        match self {
            Workflow::Single => Variant::ALL.to_vec(),
            Workflow::SigmaSweep => vec![Variant::BiradsScae, Variant::BiradsSsdl],
            _ => vec![Variant::BiradsSsdl],
        }
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Workflow {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Workflow::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| format!("unknown workflow {s:?} (expected single, cross, pretrain, boundary or sigma-sweep)"))
    }
}

/// Default boundary-map widths for the sweep, at the 512-pixel scale.
pub const DEFAULT_SIGMA_GRID: [f64; 7] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0];
pub const DEFAULT_RADII: [usize; 5] = [0, 1, 2, 4, 8];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub workflow: Workflow,
    pub variants: Vec<Variant>,
    /// Base training settings; each run overrides `seed` and `variant`.
    pub train: TrainConfig,
    pub arch: ArchitectureConfig,
    /// Boundary-map width at the 512-pixel scale.
    pub sigma: f64,
    /// Sweep grid at the 512-pixel scale.
    pub sigma_grid: Vec<f64>,
    /// Morphology radii in pixels of the model input.
    pub radii: Vec<usize>,
    pub repeats: usize,
    pub train_fraction: f64,
    /// Dataset tags; cross and pretrain use the first two (source first).
    /// Empty means "as they appear in the manifest".
    pub tags: Vec<String>,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(workflow: Workflow, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            workflow,
            variants: workflow.default_variants(),
            train: TrainConfig::default(),
            arch: ArchitectureConfig::with_side(64),
            sigma: DEFAULT_SIGMA,
            sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            radii: DEFAULT_RADII.to_vec(),
            repeats: 5,
            train_fraction: 0.8,
            tags: Vec::new(),
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.arch.validate()?;
        if self.repeats == 0 {
            return Err(Error::Config("repeat count must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants requested".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::param(format!(
                "train fraction must be in (0,1), got {}",
                self.train_fraction
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {}", self.sigma)));
        }
        match self.workflow {
            Workflow::Boundary => {
                if self.radii.is_empty() {
                    return Err(Error::Config("boundary study needs at least one radius".into()));
                }
                if let Some(v) = self.variants.iter().find(|v| !v.is_birads()) {
                    return Err(Error::Config(format!("boundary study needs a birads variant, got {v}")));
                }
            }
            Workflow::SigmaSweep => {
                if self.sigma_grid.is_empty() {
                    return Err(Error::Config("sigma sweep needs a non-empty grid".into()));
                }
                if let Some(s) = self.sigma_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                    return Err(Error::param(format!("sigma must be positive, got {s}")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn run_seed(&self, repeat: usize) -> u64 {
        self.train.seed.wrapping_add(repeat as u64)
    }

    fn run_config(&self, variant: Variant, repeat: usize) -> TrainConfig {
        TrainConfig {
            seed: self.run_seed(repeat),
            variant,
            ..self.train.clone()
        }
    }

    fn sigma_px(&self) -> f64 {
        sigma_at_side(self.sigma, self.arch.input_side)
    }

    fn two_tags(&self, manifest: &Manifest) -> Result<(String, String)> {
        let tags = if self.tags.is_empty() { manifest.tags() } else { self.tags.clone() };
        match tags.as_slice() {
            [a, b, ..] if a != b => Ok((a.clone(), b.clone())),
            _ => Err(Error::Config(format!(
                "{} workflow needs two distinct dataset tags, found {tags:?}",
                self.workflow
            ))),
        }
    }

    fn one_tag(&self, manifest: &Manifest) -> Result<String> {
        let tags = if self.tags.is_empty() { manifest.tags() } else { self.tags.clone() };
        tags.into_iter()
            .next()
            .ok_or_else(|| Error::Config("manifest has no samples".into()))
    }
}

/// Tables written by a workflow, in write order.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<(PathBuf, Table)>,
}

impl ExperimentOutput {
    fn emit(&mut self, path: PathBuf, table: Table) -> Result<()> {
        emit_report(&table, &path)?;
        self.tables.push((path, table));
        Ok(())
    }

    pub fn get(&self, file_name: &str) -> Option<&Table> {
        self.tables
            .iter()
            .find(|(p, _)| p.file_name().is_some_and(|n| n == file_name))
            .map(|(_, t)| t)
    }
}

pub fn run_experiment(spec: &ExperimentSpec, manifest: &Manifest) -> Result<ExperimentOutput> {
    spec.validate()?;
    match spec.workflow {
        Workflow::Single => run_experiment_single(spec, manifest),
        Workflow::Cross => run_experiment_cross(spec, manifest),
        Workflow::Pretrain => run_pretrain_transfer(spec, manifest),
        Workflow::Boundary => run_boundary_perturbation(spec, manifest),
        Workflow::SigmaSweep => run_sigma_sweep(spec, manifest),
    }
}

fn percent(x: Option<f64>) -> String {
    format_opt(x.map(|v| v * 100.0))
}

/// Key columns, then `row`, the metric columns and their `_std` twins.
/// Each group yields one row per repeat and one `mean` row.
fn metrics_table(key_cols: &[&str], groups: &[(Vec<String>, Vec<MetricsReport>)]) -> Result<Table> {
    let mut header: Vec<String> = key_cols.iter().map(|s| s.to_string()).collect();
    header.push("row".into());
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(METRIC_COLUMNS.iter().map(|s| format!("{s}_std")));
    let mut t = Table::new(header);
    for (keys, reports) in groups {
        for (r, rep) in reports.iter().enumerate() {
            let mut row = keys.clone();
            row.push(r.to_string());
            row.extend(rep.values().iter().map(|v| percent(*v)));
            row.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS.len()));
            t.push(row)?;
        }
        let agg = aggregate_runs(reports)?;
        let mut row = keys.clone();
        row.push("mean".into());
        row.extend(agg.iter().map(|a| format_opt(a.map(|m| m.mean))));
        row.extend(agg.iter().map(|a| format_opt(a.map(|m| m.std))));
        t.push(row)?;
    }
    Ok(t)
}

fn train_model(spec: &ExperimentSpec, variant: Variant, repeat: usize, data: &[Example]) -> Result<(SsdlModel<f32>, TrainLog)> {
    let mut model = SsdlModel::<f32>::build(spec.arch.clone(), spec.run_seed(repeat))?;
    let log = fit_variant(&mut model, data, &spec.run_config(variant, repeat))?;
    Ok((model, log))
}

/// Metrics of a frozen model on labeled examples, scored by the malignant
/// probability.
pub fn evaluate_model(model: &SsdlModel<f32>, data: &[Example]) -> Result<MetricsReport> {
    let rows: Vec<&Example> = data.iter().filter(|e| e.label.is_some()).collect();
    if rows.is_empty() {
        return Err(Error::domain("nothing to evaluate"));
    }
    let probs = predict(model, &rows)?;
    let labels: Vec<Label> = rows.iter().map(|e| e.label.expect("labeled")).collect();
    let scores: Vec<f64> = probs.iter().map(|p| p[Label::Malignant.index()]).collect();
    evaluate_scores(&labels, &scores)
}

pub fn run_experiment_single(spec: &ExperimentSpec, manifest: &Manifest) -> Result<ExperimentOutput> {
    spec.validate()?;
    let samples = load_samples(manifest, spec.arch.input_side)?;
    let tag = spec.one_tag(manifest)?;
    let mut cache = BfmCache::new();
    let mut per_variant: Vec<Vec<MetricsReport>> = vec![Vec::new(); spec.variants.len()];
    for repeat in 0..spec.repeats {
        let part = partition_tag(&samples, &tag, spec.train_fraction, spec.run_seed(repeat))?;
        for (k, &variant) in spec.variants.iter().enumerate() {
            let train = examples(&samples, &part.train, variant, spec.sigma_px(), &mut cache)?;
            let test = examples(&samples, &part.test, variant, spec.sigma_px(), &mut cache)?;
            let (model, _) = train_model(spec, variant, repeat, &train)?;
            per_variant[k].push(evaluate_model(&model, &test)?);
        }
    }
    let groups: Vec<(Vec<String>, Vec<MetricsReport>)> = spec
        .variants
        .iter()
        .zip(per_variant)
        .map(|(v, reps)| (vec![v.to_string()], reps))
        .collect();
    let mut out = ExperimentOutput::default();
    out.emit(spec.out_dir.join("single.csv"), metrics_table(&["variant"], &groups)?)?;
    Ok(out)
}

pub fn run_experiment_cross(spec: &ExperimentSpec, manifest: &Manifest) -> Result<ExperimentOutput> {
    spec.validate()?;
    let (tag_a, tag_b) = spec.two_tags(manifest)?;
    let samples = load_samples(manifest, spec.arch.input_side)?;
    let mut cache = BfmCache::new();
    let mut results: [Vec<Vec<MetricsReport>>; 2] =
        [vec![Vec::new(); spec.variants.len()], vec![Vec::new(); spec.variants.len()]];
    for repeat in 0..spec.repeats {
        let seed = spec.run_seed(repeat);
        let parts = [
            partition_tag(&samples, &tag_a, spec.train_fraction, seed)?,
            partition_tag(&samples, &tag_b, spec.train_fraction, seed)?,
        ];
        let mut combined: Vec<usize> = parts.iter().flat_map(|p| p.train.iter().copied()).collect();
        combined.sort_unstable();
        for (k, &variant) in spec.variants.iter().enumerate() {
            let train = examples(&samples, &combined, variant, spec.sigma_px(), &mut cache)?;
            let (model, _) = train_model(spec, variant, repeat, &train)?;
            for (t, part) in parts.iter().enumerate() {
                let test = examples(&samples, &part.test, variant, spec.sigma_px(), &mut cache)?;
                results[t][k].push(evaluate_model(&model, &test)?);
            }
        }
    }
    let mut out = ExperimentOutput::default();
    for (tag, per_variant) in [tag_a, tag_b].iter().zip(results) {
        let groups: Vec<(Vec<String>, Vec<MetricsReport>)> = spec
            .variants
            .iter()
            .zip(per_variant)
            .map(|(v, reps)| (vec![v.to_string(), tag.clone()], reps))
            .collect();
        out.emit(
            spec.out_dir.join(format!("cross_{tag}.csv")),
            metrics_table(&["variant", "test_tag"], &groups)?,
        )?;
    }
    Ok(out)
}

fn curve_table(column: &str, runs: &[(Variant, usize, TrainLog)], pick: fn(&crate::training::EpochRecord) -> Option<f64>) -> Result<Table> {
    let mut t = Table::new(["variant", "repeat", "epoch", column]);
    for (v, r, log) in runs {
        for rec in &log.records {
            t.push(vec![v.to_string(), r.to_string(), rec.epoch.to_string(), format_opt(pick(rec))])?;
        }
    }
    Ok(t)
}

pub fn run_pretrain_transfer(spec: &ExperimentSpec, manifest: &Manifest) -> Result<ExperimentOutput> {
    spec.validate()?;
    let (source, target) = spec.two_tags(manifest)?;
    let samples = load_samples(manifest, spec.arch.input_side)?;
    let mut cache = BfmCache::new();
    let ckpt_dir = spec.out_dir.join("checkpoints");
    let mut cold_reports: Vec<Vec<MetricsReport>> = vec![Vec::new(); spec.variants.len()];
    let mut warm_reports: Vec<Vec<MetricsReport>> = vec![Vec::new(); spec.variants.len()];
    let (mut cold_logs, mut warm_logs) = (Vec::new(), Vec::new());
    for repeat in 0..spec.repeats {
        let seed = spec.run_seed(repeat);
        let src = partition_tag(&samples, &source, spec.train_fraction, seed)?;
        let dst = partition_tag(&samples, &target, spec.train_fraction, seed)?;
        for (k, &variant) in spec.variants.iter().enumerate() {
            let cfg = spec.run_config(variant, repeat);
            let src_train = examples(&samples, &src.train, variant, spec.sigma_px(), &mut cache)?;
            let dst_train = examples(&samples, &dst.train, variant, spec.sigma_px(), &mut cache)?;
            let dst_test = examples(&samples, &dst.test, variant, spec.sigma_px(), &mut cache)?;

            let (pretrained, _) = train_model(spec, variant, repeat, &src_train)?;
            let stem = format!("{variant}_r{repeat}");
            let src_path = ckpt_dir.join(format!("{stem}_source.ckpt"));
            save_checkpoint(&pretrained, &src_path)?;
            let (warm, warm_log) = fine_tune(&src_path, &spec.arch, &dst_train, &cfg)?;
            save_checkpoint(&warm, &ckpt_dir.join(format!("{stem}_warm.ckpt")))?;

            let (cold, cold_log) = train_model(spec, variant, repeat, &dst_train)?;
            save_checkpoint(&cold, &ckpt_dir.join(format!("{stem}_cold.ckpt")))?;

            cold_reports[k].push(evaluate_model(&cold, &dst_test)?);
            warm_reports[k].push(evaluate_model(&warm, &dst_test)?);
            cold_logs.push((variant, repeat, cold_log));
            warm_logs.push((variant, repeat, warm_log));
        }
    }
    let mut groups = Vec::new();
    for (k, v) in spec.variants.iter().enumerate() {
        groups.push((vec![v.to_string(), "cold".to_string()], cold_reports[k].clone()));
        groups.push((vec![v.to_string(), "warm".to_string()], warm_reports[k].clone()));
    }
    let mut out = ExperimentOutput::default();
    out.emit(spec.out_dir.join("pretrain.csv"), metrics_table(&["variant", "start"], &groups)?)?;
    for (name, runs) in [("warm", &warm_logs), ("cold", &cold_logs)] {
        out.emit(
            spec.out_dir.join(format!("loss_r_{name}.csv")),
            curve_table("loss_r", runs, |r| r.loss_r)?,
        )?;
        out.emit(
            spec.out_dir.join(format!("loss_c_{name}.csv")),
            curve_table("loss_c", runs, |r| r.loss_c)?,
        )?;
    }
    Ok(out)
}

/// One evaluation of a frozen model on perturbed test boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationPoint {
    pub op: &'static str,
    pub radius: usize,
    /// `None` when every test mask vanished.
    pub mean_dice: Option<f64>,
    pub evaluated: usize,
    pub skipped: usize,
    pub report: Option<MetricsReport>,
}

fn op_name(op: Option<MorphOp>) -> &'static str {
    match op {
        None => "none",
        Some(MorphOp::Dilate) => "dilate",
        Some(MorphOp::Erode) => "erode",
    }
}

/// Evaluates `model` with each test mask dilated or eroded by each radius
/// before the boundary maps are rebuilt. The first point is the
/// unperturbed baseline.
pub fn perturbation_curve(
    model: &SsdlModel<f32>,
    samples: &[Sample],
    test: &[usize],
    variant: Variant,
    sigma_px: f64,
    radii: &[usize],
    cache: &mut BfmCache,
) -> Result<Vec<PerturbationPoint>> {
    let mut settings = vec![(None, 0usize)];
    for op in [MorphOp::Dilate, MorphOp::Erode] {
        settings.extend(radii.iter().map(|&r| (Some(op), r)));
    }
    let mut points = Vec::with_capacity(settings.len());
    for (op, radius) in settings {
        let mut data = Vec::new();
        let (mut dice_sum, mut skipped) = (0.0, 0usize);
        for &i in test {
            let s = &samples[i];
            let fake = match op {
                None => s.mask.clone(),
                Some(op) => {
                    let m = morph(&s.mask, radius, op);
                    if m.emptied {
                        skipped += 1;
                        continue;
                    }
                    m.mask
                }
            };
            dice_sum += dice(&s.mask, &fake)?;
            data.push(Example {
                pixels: model_input(&s.image, &fake, variant, sigma_px, cache)?,
                label: s.label,
            });
        }
        let evaluated = data.len();
        let (mean_dice, report) = if data.is_empty() {
            (None, None)
        } else {
            (Some(dice_sum / evaluated as f64), Some(evaluate_model(model, &data)?))
        };
        points.push(PerturbationPoint {
            op: op_name(op),
            radius,
            mean_dice,
            evaluated,
            skipped,
            report,
        });
    }
    Ok(points)
}

pub fn run_boundary_perturbation(spec: &ExperimentSpec, manifest: &Manifest) -> Result<ExperimentOutput> {
    spec.validate()?;
    let samples = load_samples(manifest, spec.arch.input_side)?;
    let tag = spec.one_tag(manifest)?;
    let mut cache = BfmCache::new();
    let mut header: Vec<String> = ["variant", "row", "op", "radius", "mean_dice", "evaluated", "skipped"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    let mut table = Table::new(header);
    // (dice, acc) of every per-repeat point, for the binned curve
    let mut scatter: Vec<(f64, f64)> = Vec::new();

    for &variant in &spec.variants {
        let mut curves: Vec<Vec<PerturbationPoint>> = Vec::new();
        for repeat in 0..spec.repeats {
            let part = partition_tag(&samples, &tag, spec.train_fraction, spec.run_seed(repeat))?;
            let train = examples(&samples, &part.train, variant, spec.sigma_px(), &mut cache)?;
            let (model, _) = train_model(spec, variant, repeat, &train)?;
            let curve =
                perturbation_curve(&model, &samples, &part.test, variant, spec.sigma_px(), &spec.radii, &mut cache)?;
            for p in &curve {
                let mut row = vec![
                    variant.to_string(),
                    repeat.to_string(),
                    p.op.to_string(),
                    p.radius.to_string(),
                    format_opt(p.mean_dice),
                    p.evaluated.to_string(),
                    p.skipped.to_string(),
                ];
                match &p.report {
                    Some(r) => row.extend(r.values().iter().map(|v| percent(*v))),
                    None => row.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS.len())),
                }
                table.push(row)?;
                if let (Some(d), Some(r), true) = (p.mean_dice, &p.report, p.op != "none") {
                    scatter.push((d, r.acc));
                }
            }
            curves.push(curve);
        }
        for j in 0..curves[0].len() {
            let pts: Vec<&PerturbationPoint> = curves.iter().map(|c| &c[j]).collect();
            let reports: Vec<MetricsReport> = pts.iter().filter_map(|p| p.report).collect();
            let dices: Vec<f64> = pts.iter().filter_map(|p| p.mean_dice).collect();
            let mut row = vec![
                variant.to_string(),
                "mean".into(),
                pts[0].op.to_string(),
                pts[0].radius.to_string(),
                format_opt((!dices.is_empty()).then(|| dices.iter().sum::<f64>() / dices.len() as f64)),
                pts.iter().map(|p| p.evaluated).sum::<usize>().to_string(),
                pts.iter().map(|p| p.skipped).sum::<usize>().to_string(),
            ];
            if reports.is_empty() {
                row.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS.len()));
            } else {
                row.extend(aggregate_runs(&reports)?.iter().map(|a| format_opt(a.map(|m| m.mean))));
            }
            table.push(row)?;
        }
    }

    let mut bins: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (d, acc) in scatter {
        let bin = ((d * 20.0).floor() as usize).min(19);
        bins.entry(bin).or_default().push(acc);
    }
    let mut binned = Table::new(["dice_lo", "dice_hi", "points", "ACC"]);
    for (bin, accs) in bins {
        binned.push(vec![
            format_number(bin as f64 * 5.0),
            format_number(bin as f64 * 5.0 + 5.0),
            accs.len().to_string(),
            format_number(100.0 * accs.iter().sum::<f64>() / accs.len() as f64),
        ])?;
    }
    let mut out = ExperimentOutput::default();
    out.emit(spec.out_dir.join("boundary.csv"), table)?;
    out.emit(spec.out_dir.join("boundary_bins.csv"), binned)?;
    Ok(out)
}

pub fn run_sigma_sweep(spec: &ExperimentSpec, manifest: &Manifest) -> Result<ExperimentOutput> {
    spec.validate()?;
    let samples = load_samples(manifest, spec.arch.input_side)?;
    let tag = spec.one_tag(manifest)?;
    let parts: Vec<Partition> = (0..spec.repeats)
        .map(|r| partition_tag(&samples, &tag, spec.train_fraction, spec.run_seed(r)))
        .collect::<Result<_>>()?;
    let all: Vec<usize> = (0..samples.len()).collect();
    let mut cache = BfmCache::new();
    let mut table = Table::new(["sigma", "sigma_px", "variant", "repeats", "ACC_mean", "ACC_std", "input_digest"]);
    for &sigma in &spec.sigma_grid {
        let sigma_px = sigma_at_side(sigma, spec.arch.input_side);
        for &variant in &spec.variants {
            let inputs = examples(&samples, &all, variant, sigma_px, &mut cache)?;
            let mut reports = Vec::with_capacity(spec.repeats);
            for (repeat, part) in parts.iter().enumerate() {
                let pick = |idx: &[usize]| -> Vec<Example> { idx.iter().map(|&i| inputs[i].clone()).collect() };
                let (model, _) = train_model(spec, variant, repeat, &pick(&part.train))?;
                reports.push(evaluate_model(&model, &pick(&part.test))?);
            }
            let acc = aggregate_runs(&reports)?[0].expect("accuracy is always defined");
            table.push(vec![
                format_number(sigma),
                format_number(sigma_px),
                variant.to_string(),
                spec.repeats.to_string(),
                format_number(acc.mean),
                format_number(acc.std),
                inputs_digest(&inputs),
            ])?;
        }
    }
    let mut out = ExperimentOutput::default();
    out.emit(spec.out_dir.join("sigma_sweep.csv"), table)?;
    Ok(out)
}

/// Loads the manifest at `manifest_path` and runs the spec's workflow.
pub fn run_experiment_at(spec: &ExperimentSpec, manifest_path: &Path) -> Result<ExperimentOutput> {
    let manifest = super::manifest::load_manifest(manifest_path)?;
    run_experiment(spec, &manifest)
}
