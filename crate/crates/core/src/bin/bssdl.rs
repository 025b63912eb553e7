use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use birads_ssdl::bfm::{pgm, DEFAULT_SIGMA};
use birads_ssdl::harness::data::{examples, sigma_at_side, BfmCache};
use birads_ssdl::harness::{
    evaluate_model, load_manifest, load_samples, partition_tag, perturbation_curve, run_experiment,
    synth_generate_many, write_manifest, ExperimentSpec, Manifest, SampleRecord, SynthConfig, Workflow,
    DEFAULT_RADII, DEFAULT_SIGMA_GRID,
};
use birads_ssdl::network::{load_checkpoint_for, save_checkpoint, ArchitectureConfig, SsdlModel};
use birads_ssdl::report::{emit_report, format_opt, Table};
use birads_ssdl::training::{fine_tune, fit_variant, Schedule, TrainConfig, Variant};
use birads_ssdl::{Error, Result};

/// Boundary-feature-map semi-supervised lesion classification.
#[derive(Parser, Debug)]
#[command(name = "bssdl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic lesion dataset and its manifest.
    Synth(SynthArgs),
    /// Write boundary feature maps for every sample of a manifest.
    Bfm(BfmArgs),
    /// Train one model and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test portion of a manifest.
    Eval(EvalArgs),
    /// Boundary-perturbation study.
    Perturb(PerturbArgs),
    /// Sweep the boundary-map width.
    SweepSigma(SweepArgs),
    /// Run an experiment workflow and emit its CSV reports.
    Report(ReportArgs),
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse()
}

fn parse_schedule(s: &str) -> std::result::Result<Schedule, String> {
    s.parse()
}

fn parse_workflow(s: &str) -> std::result::Result<Workflow, String> {
    s.parse()
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Boundary-map width at the 512-pixel scale.
    #[arg(long, default_value_t = DEFAULT_SIGMA, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 3e-4, allow_negative_numbers = true)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
    gamma: f64,
    /// Epoch cap per training stage.
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "input-size", default_value_t = 64)]
    input_size: usize,
    #[arg(long, default_value = "alternating", value_parser = parse_schedule)]
    schedule: Schedule,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Fraction of each class used for training when the manifest has no
    /// fixed splits.
    #[arg(long = "train-fraction", default_value_t = 0.8)]
    train_fraction: f64,
}

impl Common {
    fn train_config(&self, variant: Variant) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            lr: self.lr,
            batch_size: self.batch,
            max_epochs: self.epochs,
            seed: self.seed,
            schedule: self.schedule,
            variant,
            ..TrainConfig::default()
        }
    }

    fn arch(&self) -> ArchitectureConfig {
        ArchitectureConfig::with_side(self.input_size)
    }

    fn spec(&self, workflow: Workflow, variants: Vec<Variant>, tags: Vec<String>, out: &Path) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(workflow, out);
        if !variants.is_empty() {
            spec.variants = variants;
        }
        spec.train = self.train_config(Variant::default());
        spec.arch = self.arch();
        spec.sigma = self.sigma;
        spec.repeats = self.repeats;
        spec.train_fraction = self.train_fraction;
        spec.tags = tags;
        spec
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "n-benign", default_value_t = 80)]
    n_benign: usize,
    #[arg(long = "n-malignant", default_value_t = 80)]
    n_malignant: usize,
    #[arg(long = "n-unlabeled", default_value_t = 0)]
    n_unlabeled: usize,
    #[arg(long = "input-size", default_value_t = 64)]
    input_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    speckle: f64,
    /// One dataset per tag; the i-th uses seed + i.
    #[arg(long, value_delimiter = ',', default_value = "A")]
    tags: Vec<String>,
}

#[derive(Args, Debug)]
struct BfmArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long = "input-size", default_value_t = 64)]
    input_size: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "birads-ssdl", value_parser = parse_variant)]
    variant: Variant,
    /// Checkpoint to fine-tune instead of starting cold.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Dataset tag to train on; defaults to the first in the manifest.
    #[arg(long)]
    tag: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Metrics CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "birads-ssdl", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long)]
    tag: Option<String>,
    /// Evaluate every labeled sample rather than the test portion.
    #[arg(long)]
    all: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Frozen model to perturb; trains one per repeat when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "birads-ssdl", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RADII)]
    radii: Vec<usize>,
    #[arg(long)]
    tag: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Widths at the 512-pixel scale.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIGMA_GRID)]
    grid: Vec<f64>,
    #[arg(long = "variant", value_delimiter = ',', value_parser = parse_variant)]
    variants: Vec<Variant>,
    #[arg(long)]
    tag: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_workflow)]
    workflow: Workflow,
    #[arg(long = "variant", value_delimiter = ',', value_parser = parse_variant)]
    variants: Vec<Variant>,
    /// Dataset tags; source first for pretrain.
    #[arg(long, value_delimiter = ',')]
    tags: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RADII)]
    radii: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIGMA_GRID)]
    grid: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

fn first_tag(manifest: &Manifest, tag: Option<String>) -> Result<String> {
    match tag {
        Some(t) => Ok(t),
        None => manifest
            .tags()
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config("manifest has no samples".into())),
    }
}

fn print_outputs(tables: &[(PathBuf, Table)]) {
    for (p, t) in tables {
        println!("wrote {} ({} rows)", p.display(), t.rows.len());
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfgs: Vec<SynthConfig> = a
        .tags
        .iter()
        .enumerate()
        .map(|(i, tag)| SynthConfig {
            n_benign: a.n_benign,
            n_malignant: a.n_malignant,
            n_unlabeled: a.n_unlabeled,
            side: a.input_size,
            seed: a.seed.wrapping_add(i as u64),
            speckle_strength: a.speckle,
            dataset_tag: tag.clone(),
            ..SynthConfig::default()
        })
        .collect();
    let path = synth_generate_many(&cfgs, &a.out)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_bfm(a: BfmArgs) -> Result<()> {
    if !(a.sigma > 0.0 && a.sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {}", a.sigma)));
    }
    ArchitectureConfig::with_side(a.input_size).validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let samples = load_samples(&manifest, a.input_size)?;
    let sigma_px = sigma_at_side(a.sigma, a.input_size);
    let mut cache = BfmCache::new();
    for dir in ["bfm", "masks"] {
        std::fs::create_dir_all(a.out.join(dir)).map_err(|e| Error::io(a.out.join(dir).display().to_string(), e))?;
    }
    let mut records = Vec::with_capacity(samples.len());
    for (s, rec) in samples.iter().zip(&manifest.records) {
        let bfm = cache.get(&s.image, &s.mask, sigma_px)?;
        let samples_u8: Vec<u8> = bfm.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        let image_rel = PathBuf::from("bfm").join(format!("{}.pgm", s.id));
        let mask_rel = PathBuf::from("masks").join(format!("{}.pgm", s.id));
        pgm::write(&a.out.join(&image_rel), a.input_size, a.input_size, &samples_u8)?;
        pgm::write_mask(&a.out.join(&mask_rel), &s.mask)?;
        records.push(SampleRecord {
            image_path: image_rel,
            mask_path: mask_rel,
            ..rec.clone()
        });
    }
    let path = a.out.join("manifest.tsv");
    write_manifest(&path, &records)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let arch = a.common.arch();
    arch.validate()?;
    let cfg = a.common.train_config(a.variant);
    cfg.validate()?;
    let samples = load_samples(&manifest, arch.input_side)?;
    let tag = first_tag(&manifest, a.tag)?;
    let part = partition_tag(&samples, &tag, a.common.train_fraction, a.common.seed)?;
    let mut cache = BfmCache::new();
    let sigma_px = sigma_at_side(a.common.sigma, arch.input_side);
    let data = examples(&samples, &part.train, a.variant, sigma_px, &mut cache)?;
    let (model, log) = match &a.init {
        Some(init) => fine_tune(init, &arch, &data, &cfg)?,
        None => {
            let mut model = SsdlModel::<f32>::build(arch, a.common.seed)?;
            let log = fit_variant(&mut model, &data, &cfg)?;
            (model, log)
        }
    };
    save_checkpoint(&model, &a.out)?;
    let curve = a.out.with_extension("loss.csv");
    emit_report(&log.to_table(), &curve)?;
    let last = log.last();
    println!(
        "trained {} for {} epochs on {} samples; train_acc={}; checkpoint {}; curve {}",
        a.variant,
        log.records.len(),
        data.len(),
        format_opt(last.and_then(|r| r.train_acc)),
        a.out.display(),
        curve.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let arch = a.common.arch();
    let model = load_checkpoint_for(&a.model, &arch)?;
    let samples = load_samples(&manifest, arch.input_side)?;
    let tag = first_tag(&manifest, a.tag)?;
    let idx: Vec<usize> = if a.all {
        (0..samples.len()).filter(|&i| samples[i].tag == tag && samples[i].label.is_some()).collect()
    } else {
        partition_tag(&samples, &tag, a.common.train_fraction, a.common.seed)?.test
    };
    let mut cache = BfmCache::new();
    let data = examples(&samples, &idx, a.variant, sigma_at_side(a.common.sigma, arch.input_side), &mut cache)?;
    let report = evaluate_model(&model, &data)?;
    let mut t = Table::new(
        ["variant", "samples"]
            .into_iter()
            .map(String::from)
            .chain(birads_ssdl::evaluation::METRIC_COLUMNS.iter().map(|s| s.to_string())),
    );
    let mut row = vec![a.variant.to_string(), data.len().to_string()];
    row.extend(report.values().iter().map(|v| format_opt(v.map(|x| x * 100.0))));
    t.push(row)?;
    emit_report(&t, &a.out)?;
    print!("{}", t.to_csv());
    Ok(())
}

fn cmd_perturb(a: PerturbArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let tags: Vec<String> = a.tag.clone().into_iter().collect();
    let mut spec = a.common.spec(Workflow::Boundary, vec![a.variant], tags, &a.out);
    spec.radii = a.radii.clone();
    spec.validate()?;
    let Some(model_path) = &a.model else {
        let out = run_experiment(&spec, &manifest)?;
        print_outputs(&out.tables);
        return Ok(());
    };
    let model = load_checkpoint_for(model_path, &spec.arch)?;
    let samples = load_samples(&manifest, spec.arch.input_side)?;
    let tag = first_tag(&manifest, a.tag)?;
    let part = partition_tag(&samples, &tag, spec.train_fraction, a.common.seed)?;
    let mut cache = BfmCache::new();
    let sigma_px = sigma_at_side(spec.sigma, spec.arch.input_side);
    let curve = perturbation_curve(&model, &samples, &part.test, a.variant, sigma_px, &spec.radii, &mut cache)?;
    let mut t = Table::new(
        ["op", "radius", "mean_dice", "evaluated", "skipped"]
            .into_iter()
            .map(String::from)
            .chain(birads_ssdl::evaluation::METRIC_COLUMNS.iter().map(|s| s.to_string())),
    );
    for p in curve {
        let mut row = vec![
            p.op.to_string(),
            p.radius.to_string(),
            format_opt(p.mean_dice),
            p.evaluated.to_string(),
            p.skipped.to_string(),
        ];
        match p.report {
            Some(r) => row.extend(r.values().iter().map(|v| format_opt(v.map(|x| x * 100.0)))),
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        t.push(row)?;
    }
    let path = a.out.join("boundary.csv");
    emit_report(&t, &path)?;
    print_outputs(&[(path, t)]);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let tags: Vec<String> = a.tag.into_iter().collect();
    let mut spec = a.common.spec(Workflow::SigmaSweep, a.variants, tags, &a.out);
    spec.sigma_grid = a.grid;
    let out = run_experiment(&spec, &manifest)?;
    print_outputs(&out.tables);
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let mut spec = a.common.spec(a.workflow, a.variants, a.tags, &a.out);
    spec.radii = a.radii;
    spec.sigma_grid = a.grid;
    let out = run_experiment(&spec, &manifest)?;
    print_outputs(&out.tables);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Bfm(a) => cmd_bfm(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::SweepSigma(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
