//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Positional arguments select criteria by substring of their names, so
//! `cargo test --test acceptance -- metric` runs only the metric check.
//! Criteria run in order on one thread.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use birads_ssdl::bfm::{edt, extract_boundary, make_bfm, pgm, GrayImage, LesionMask, DEFAULT_SIGMA};
use birads_ssdl::evaluation::{metrics_from_confusion, ConfusionCounts};
use birads_ssdl::harness::{
    load_manifest, load_samples, run_experiment_at, sigma_at_side, synth_dataset, synth_generate, synth_generate_many,
    ExperimentSpec, SynthConfig, Workflow, MANIFEST_HEADER,
};
use birads_ssdl::network::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, ArchitectureConfig, Group, SsdlModel,
};
use birads_ssdl::report::Table;
use birads_ssdl::tensor::{ParamStore, Tensor};
use birads_ssdl::training::{changed_parameters, ssdl_fit, Example, Schedule, TrainConfig, Variant};
use birads_ssdl::Error;
use common::{away_from_zero, distinct_values, grad_check, random_tensor, reduce, rng};
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    ensure!(
        elapsed.as_secs_f64() < limit_s as f64,
        "{what} took {:.1} s, limit {limit_s} s",
        elapsed.as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

fn random_blob(r: &mut impl Rng, side: usize) -> LesionMask {
    loop {
        let n = r.gen_range(1..4);
        let shapes: Vec<(f64, f64, f64, f64)> = (0..n)
            .map(|_| {
                let s = side as f64;
                (r.gen_range(0.0..s), r.gen_range(0.0..s), r.gen_range(1.0..s / 3.0), r.gen_range(1.0..s / 3.0))
            })
            .collect();
        let mut m = LesionMask::from_fn(side, side, |y, x| {
            shapes.iter().any(|&(cy, cx, ay, ax)| {
                let dy = (y as f64 - cy) / ay;
                let dx = (x as f64 - cx) / ax;
                dy * dy + dx * dx <= 1.0
            })
        });
        for _ in 0..r.gen_range(0..5) {
            m.set(r.gen_range(0..side), r.gen_range(0..side), true);
        }
        if !m.is_empty() {
            return m;
        }
    }
}

/// Foreground pixels with a 4-neighbour outside the mask or the frame.
fn contour(m: &LesionMask) -> Vec<(usize, usize)> {
    let (h, w) = (m.height() as i64, m.width() as i64);
    let at = |y: i64, x: i64| y >= 0 && x >= 0 && y < h && x < w && m.get(y as usize, x as usize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if at(y, x) && [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|&(dy, dx)| !at(y + dy, x + dx)) {
                out.push((y as usize, x as usize));
            }
        }
    }
    out
}

fn all_pairs_sq(points: &[(usize, usize)], h: usize, w: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let best = points
                .iter()
                .map(|&(py, px)| {
                    let dy = y as i64 - py as i64;
                    let dx = x as i64 - px as i64;
                    (dy * dy + dx * dx) as u64
                })
                .min()
                .unwrap();
            out.push(best);
        }
    }
    out
}

fn mcc_oracle(tp: f64, fn_: f64, tn: f64, fp: f64) -> f64 {
    let n = tp + fn_ + tn + fp;
    let s = (tp + fn_) / n;
    let p = (tp + fp) / n;
    let den = (p * s * (1.0 - s) * (1.0 - p)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp / n - s * p) / den
    }
}

fn cell(t: &Table, row: &[String], col: &str) -> Result<String, String> {
    let i = t.column(col).ok_or_else(|| format!("missing column {col}"))?;
    Ok(row[i].clone())
}

fn num(t: &Table, row: &[String], col: &str) -> Result<f64, String> {
    let s = cell(t, row, col)?;
    s.parse().map_err(|_| format!("column {col}: {s:?} is not a number"))
}

fn read_table(path: &Path) -> Result<Table, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Table::parse(&text).map_err(|e| e.to_string())
}

fn bfm_examples(n_benign: usize, n_malignant: usize, side: usize, seed: u64) -> Vec<Example> {
    let cfg = SynthConfig {
        n_benign,
        n_malignant,
        side,
        seed,
        ..Default::default()
    };
    synth_dataset(&cfg)
        .unwrap()
        .into_iter()
        .map(|s| Example {
            pixels: make_bfm(&s.image, &s.mask, sigma_at_side(DEFAULT_SIGMA, side)).unwrap().to_f32(),
            label: s.label,
        })
        .collect()
}

fn group_names(params: &ParamStore<f32>, g: Group) -> Vec<String> {
    params
        .names()
        .filter(|n| Group::of(n) == Some(g))
        .map(str::to_string)
        .collect()
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

fn edt_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut pixels = 0;
    for case in 0..50 {
        let m = random_blob(&mut r, 64);
        let b = extract_boundary(&m).map_err(|e| e.to_string())?;
        let d = edt(&b, 64, 64).map_err(|e| e.to_string())?;
        let oracle = all_pairs_sq(&contour(&m), 64, 64);
        ensure!(d.squared() == oracle.as_slice(), "mask {case}: squared distances differ from the all-pairs oracle");
        pixels += oracle.len();
    }
    within(start.elapsed(), 10, "50 transforms")?;
    Ok(format!("50 masks, {pixels} pixels equal"))
}

fn bfm_correctness() -> Outcome {
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let side = [16, 32, 48, 64][case % 4];
        let m = random_blob(&mut r, side);
        let img = GrayImage::new(side, side, (0..side * side).map(|_| r.gen_range(0.0..=1.0)).collect())
            .map_err(|e| e.to_string())?;
        let sigma = r.gen_range(0.5..30.0);
        let bfm = make_bfm(&img, &m, sigma).map_err(|e| e.to_string())?;
        let c = contour(&m);
        let sq = all_pairs_sq(&c, side, side);
        for (p, (&d2, &v)) in sq.iter().zip(bfm.pixels()).enumerate() {
            let expect = img.pixels()[p] * (-(d2 as f64) / (sigma * sigma)).exp();
            worst = worst.max((v - expect).abs());
        }
        for &(y, x) in &c {
            ensure!(bfm.pixels()[y * side + x] == img.get(y, x), "case {case}: boundary pixel ({y},{x}) altered");
        }
    }
    ensure!(worst < 1e-7, "max deviation from the composed oracle {worst:e}");

    ensure!(DEFAULT_SIGMA == 20.0, "library default sigma is {DEFAULT_SIGMA}");
    let spec = ExperimentSpec::new(Workflow::Single, "unused");
    ensure!(spec.sigma == 20.0, "experiment default sigma is {}", spec.sigma);

    // the command line, run without --sigma, must produce the sigma = 20 map
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = SynthConfig {
        n_benign: 2,
        n_malignant: 2,
        side: 32,
        seed: 7,
        ..Default::default()
    };
    let manifest = synth_generate(&cfg, &dir.path().join("data")).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_bssdl"))
        .args(["bfm", "--input-size", "32", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("bfm"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(status.status.success(), "bfm command failed: {}", String::from_utf8_lossy(&status.stderr));
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round();
    let mut off_default = 0.0;
    let loaded = load_manifest(&manifest).map_err(|e| e.to_string())?;
    for s in load_samples(&loaded, 32).map_err(|e| e.to_string())? {
        let (h, w, written) = pgm::read(&dir.path().join("bfm/bfm").join(format!("{}.pgm", s.id))).map_err(|e| e.to_string())?;
        ensure!((h, w) == (32, 32), "written map is {h}x{w}");
        let c = contour(&s.mask);
        let sq = all_pairs_sq(&c, 32, 32);
        let px = sigma_at_side(20.0, 32);
        let alt = sigma_at_side(10.0, 32);
        for (p, &d2) in sq.iter().enumerate() {
            let v = s.image.pixels()[p];
            let expect = quantize(v * (-(d2 as f64) / (px * px)).exp());
            ensure!(
                (written[p] as f64 - expect).abs() <= 1.0,
                "{}: pixel {p} is {} where sigma 20 gives {expect}",
                s.id,
                written[p]
            );
            off_default += (written[p] as f64 - quantize(v * (-(d2 as f64) / (alt * alt)).exp())).abs();
        }
    }
    ensure!(off_default > 0.0, "default map is indistinguishable from sigma 10");
    Ok(format!("max oracle deviation {worst:.1e}; default sigma 20 used by library, experiments and CLI"))
}

fn gradient_suite() -> Outcome {
    const H: f64 = 1e-3;
    const TOL: f64 = 1e-4;
    let start = Instant::now();
    let mut r = rng(103);
    let mut worst: Vec<(&str, f64, usize)> = Vec::new();
    let mut record = |name: &'static str, c: common::GradCheck| {
        match worst.iter_mut().find(|w| w.0 == name) {
            Some(w) => {
                w.1 = w.1.max(c.max_rel_err);
                w.2 += 1;
            }
            None => worst.push((name, c.max_rel_err, 1)),
        }
    };

    for (b, ci, co, h, w, k) in [(1, 1, 2, 5, 5, 3), (2, 2, 3, 4, 6, 3), (1, 3, 1, 3, 3, 1), (2, 1, 2, 6, 4, 5), (1, 2, 2, 7, 5, 3)] {
        let leaves = vec![
            random_tensor(&mut r, &[b, ci, h, w], -1.0, 1.0),
            random_tensor(&mut r, &[co, ci, k, k], -1.0, 1.0),
            random_tensor(&mut r, &[co], -1.0, 1.0),
        ];
        record("conv2d", grad_check(&leaves, H, |t, v| {
            let y = t.conv2d(v[0], v[1], v[2]).unwrap();
            reduce(t, y, 1)
        }));
    }
    for shape in [[1, 1, 4, 4], [2, 3, 2, 6], [1, 2, 6, 2], [3, 1, 4, 2], [1, 1, 8, 8]] {
        let leaves = vec![distinct_values(&mut r, &shape, 0.01)];
        record("maxpool2d", grad_check(&leaves, H, |t, v| {
            let y = t.maxpool2d(v[0]).unwrap();
            reduce(t, y, 2)
        }));
    }
    for (shape, f) in [([1, 1, 2, 2], 2), ([2, 2, 3, 1], 2), ([1, 3, 2, 3], 3), ([1, 1, 1, 1], 4), ([2, 1, 2, 2], 1)] {
        let leaves = vec![random_tensor(&mut r, &shape, -1.0, 1.0)];
        record("upsample2d", grad_check(&leaves, H, |t, v| {
            let y = t.upsample2d(v[0], f).unwrap();
            reduce(t, y, 3)
        }));
    }
    for (b, din, dout) in [(1, 3, 2), (4, 5, 3), (2, 8, 1), (3, 1, 4), (5, 6, 6)] {
        let leaves = vec![
            random_tensor(&mut r, &[b, din], -1.0, 1.0),
            random_tensor(&mut r, &[dout, din], -1.0, 1.0),
            random_tensor(&mut r, &[dout], -1.0, 1.0),
        ];
        record("dense", grad_check(&leaves, H, |t, v| {
            let y = t.dense(v[0], v[1], v[2]).unwrap();
            reduce(t, y, 4)
        }));
    }
    for shape in [[2, 3], [1, 2], [4, 5], [3, 2], [2, 7]] {
        let leaves = vec![away_from_zero(&mut r, &shape, 0.01)];
        record("relu", grad_check(&leaves, H, |t, v| {
            let y = t.relu(v[0]);
            reduce(t, y, 5)
        }));
        record("softmax", grad_check(&leaves, H, |t, v| {
            let y = t.softmax(v[0]).unwrap();
            reduce(t, y, 6)
        }));
        record("dropout", grad_check(&leaves, H, |t, v| {
            let y = t.dropout(v[0], 0.5, true, &mut rng(7)).unwrap();
            reduce(t, y, 8)
        }));
        record("scale", grad_check(&leaves, H, |t, v| {
            let y = t.scale(v[0], -1.7);
            reduce(t, y, 9)
        }));
        record("sum", grad_check(&leaves, H, |t, v| {
            let y = t.sum(v[0]);
            let y = t.reshape(y, &[1, 1]).unwrap();
            reduce(t, y, 10)
        }));
        let n = shape[0] * shape[1];
        record("reshape", grad_check(&leaves, H, |t, v| {
            let y = t.reshape(v[0], &[n, 1]).unwrap();
            reduce(t, y, 11)
        }));
        let rows: Vec<usize> = (0..shape[0]).rev().collect();
        record("select_rows", grad_check(&leaves, H, |t, v| {
            let y = t.select_rows(v[0], &rows).unwrap();
            reduce(t, y, 12)
        }));
        let other = vec![leaves[0].clone(), random_tensor(&mut r, &shape, -1.0, 1.0)];
        record("add", grad_check(&other, H, |t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            reduce(t, y, 13)
        }));
    }
    for (b, d) in [(1, 4), (2, 3), (3, 8), (4, 2), (5, 5)] {
        let target = random_tensor(&mut r, &[b, d], 0.0, 1.0);
        let leaves = vec![random_tensor(&mut r, &[b, d], -1.0, 1.0)];
        record("squared_error", grad_check(&leaves, H, |t, v| t.squared_error(v[0], &target).unwrap()));
    }
    for b in 1..=5 {
        let logits = vec![random_tensor(&mut r, &[b, 2], -2.0, 2.0)];
        let mut onehot = vec![0.0; b * 2];
        for i in 0..b {
            onehot[i * 2 + r.gen_range(0..2)] = 1.0;
        }
        let labels = Tensor::from_f64(&[b, 2], &onehot).unwrap();
        record("cross_entropy", grad_check(&logits, H, |t, v| {
            let p = t.softmax(v[0]).unwrap();
            t.cross_entropy(p, &labels).unwrap()
        }));
    }
    for n in 1..=5 {
        let leaves: Vec<_> = (0..n).map(|i| random_tensor(&mut r, &[i + 1, 2], -1.0, 1.0)).collect();
        record("sum_squares", grad_check(&leaves, H, |t, v| t.sum_squares(v)));
    }

    within(start.elapsed(), 60, "gradient suite")?;
    for &(name, err, shapes) in &worst {
        ensure!(shapes >= 5, "{name}: only {shapes} shapes");
        ensure!(err < TOL, "{name}: relative error {err:e}");
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    Ok(format!("{} ops x 5 shapes, max relative error {max:.1e}", worst.len()))
}

fn metric_fidelity() -> Outcome {
    let mut r = rng(104);
    let mut checked = 0;
    while checked < 10_000 {
        let c = ConfusionCounts {
            tp: r.gen_range(0..80),
            fn_: r.gen_range(0..80),
            tn: r.gen_range(0..80),
            fp: r.gen_range(0..80),
        };
        if c.total() == 0 {
            continue;
        }
        checked += 1;
        let m = metrics_from_confusion(&c);
        let (tp, fn_, tn, fp) = (c.tp as f64, c.fn_ as f64, c.tn as f64, c.fp as f64);
        let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        let pairs = [
            ("SEN", m.sen, div(tp, tp + fn_)),
            ("SPE", m.spe, div(tn, tn + fp)),
            ("PPV", m.ppv, div(tp, tp + fp)),
            ("NPV", m.npv, div(tn, tn + fn_)),
            ("ACC", m.acc, (tp + tn) / (tp + fn_ + tn + fp)),
            ("MCC", m.mcc, mcc_oracle(tp, fn_, tn, fp)),
        ];
        for (name, got, want) in pairs {
            ensure!((got - want).abs() < 1e-12, "{c:?}: {name} {got} vs oracle {want}");
        }
        ensure!(m.auc_paper == (m.sen + m.spe) / 2.0, "{c:?}: AUC identity broken");
        ensure!((-1.0..=1.0).contains(&m.mcc), "{c:?}: MCC {} out of range", m.mcc);
    }

    let m = metrics_from_confusion(&ConfusionCounts { tp: 3, fn_: 1, tn: 4, fp: 2 });
    let worked = [
        ("SEN", m.sen, 0.75, 1e-12),
        ("SPE", m.spe, 0.6667, 5e-5),
        ("PPV", m.ppv, 0.6, 1e-12),
        ("NPV", m.npv, 0.8, 1e-12),
        ("ACC", m.acc, 0.7, 1e-12),
        ("AUC", m.auc_paper, 0.70835, 5e-5),
        ("MCC", m.mcc, 10.0 / 600f64.sqrt(), 1e-12),
        ("MCC", m.mcc, 0.40825, 5e-6),
    ];
    for (name, got, want, tol) in worked {
        ensure!((got - want).abs() <= tol, "worked case {name}: {got} vs {want}");
    }
    ensure!((m.spe - 4.0 / 6.0).abs() < 1e-15 && (m.auc_paper - 17.0 / 24.0).abs() < 1e-15, "worked case fractions");
    Ok(format!("{checked} matrices within 1e-12; worked case matches"))
}

fn freezing_laws() -> Outcome {
    let data = bfm_examples(6, 6, 16, 5);
    let model = SsdlModel::<f32>::build(ArchitectureConfig::with_side(16), 9).map_err(|e| e.to_string())?;
    let before = model.params().clone();
    let mut lines = Vec::new();
    for (lambda, frozen) in [(0.0, Group::Classifier), (1.0, Group::Decoder)] {
        for schedule in [Schedule::Alternating, Schedule::Joint] {
            let cfg = TrainConfig {
                lambda,
                lr: 1e-3,
                batch_size: 4,
                max_epochs: 3,
                schedule,
                ..Default::default()
            };
            let mut m = model.clone();
            ssdl_fit(&mut m, &data, &cfg).map_err(|e| e.to_string())?;
            let changed = changed_parameters(&before, m.params());
            let names = group_names(&before, frozen);
            ensure!(!names.is_empty(), "no parameters in {frozen:?}");
            for name in &names {
                let (a, b) = (before.get(name).unwrap().value(), m.params().get(name).unwrap().value());
                let same = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
                ensure!(same, "{name} changed at lambda={lambda} ({schedule})");
            }
            ensure!(changed.iter().any(|n| n.starts_with("encoder/")), "encoder did not train ({schedule})");
            lines.push(format!("lambda={lambda} {schedule}"));
        }
    }
    Ok(format!("frozen group bitwise unchanged for {}", lines.join(", ")))
}

fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let data = bfm_examples(8, 8, 16, 11);
    ensure!(data.len() == 16, "dataset has {} samples", data.len());
    let mut model = SsdlModel::<f32>::build(ArchitectureConfig::with_side(16), 2).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        variant: Variant::BiradsSsdl,
        lr: 1e-3,
        max_epochs: 300,
        stop_window: 300,
        ..Default::default()
    };
    let log = ssdl_fit(&mut model, &data, &cfg).map_err(|e| e.to_string())?;
    let hit = log.records.iter().find(|r| r.train_acc == Some(1.0)).map(|r| r.epoch);
    ensure!(hit.is_some(), "train accuracy never reached 100%");
    let hist = log.loss_r_history();
    let means: Vec<f64> = hist.chunks(50).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    ensure!(means.windows(2).all(|w| w[1] < w[0]), "windowed loss_r not strictly decreasing: {means:?}");
    within(start.elapsed(), 120, "overfit run")?;
    Ok(format!(
        "100% at epoch {}; 50-epoch loss_r means {:.3e} -> {:.3e}",
        hit.unwrap(),
        means[0],
        means[means.len() - 1]
    ))
}

fn method_ranking() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = SynthConfig {
        n_benign: 80,
        n_malignant: 80,
        side: 64,
        seed: 2024,
        ..Default::default()
    };
    let manifest = synth_generate(&cfg, &dir.path().join("data")).map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(Workflow::Single, dir.path().join("out"));
    spec.variants = vec![Variant::BiradsSsdl, Variant::OriScae, Variant::BiradsScae];
    spec.repeats = 5;
    spec.train.max_epochs = 20;
    let out = run_experiment_at(&spec, &manifest).map_err(|e| e.to_string())?;
    let t = out.get("single.csv").ok_or("single.csv missing")?;
    let mut acc = Vec::new();
    for v in &spec.variants {
        let row = t
            .rows
            .iter()
            .find(|r| r[0] == v.as_str() && cell(t, r, "row").as_deref() == Ok("mean"))
            .ok_or(format!("no mean row for {v}"))?;
        acc.push(num(t, row, "ACC")?);
    }
    within(start.elapsed(), 1800, "ranking experiment")?;
    let summary = format!("mean ACC birads-ssdl {:.2}, ori-scae {:.2}, birads-scae {:.2}", acc[0], acc[1], acc[2]);
    ensure!(acc[0] - acc[1] >= -2.0, "{summary}: margin over ori-scae below -2");
    ensure!(acc[0] - acc[2] >= -2.0, "{summary}: margin over birads-scae below -2");
    Ok(summary)
}

/// Input side for the boundary study. Chosen so that a one-pixel dilation
/// stays above Dice 0.9 for typical lesions.
const BOUNDARY_SIDE: usize = 128;

fn boundary_degradation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = SynthConfig {
        n_benign: 250,
        n_malignant: 250,
        side: BOUNDARY_SIDE,
        seed: 3,
        ..Default::default()
    };
    let manifest = synth_generate(&cfg, &dir.path().join("data")).map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(Workflow::Boundary, dir.path().join("out"));
    spec.arch = ArchitectureConfig::with_side(BOUNDARY_SIDE);
    spec.repeats = 1;
    spec.train_fraction = 0.3;
    spec.train.max_epochs = 20;
    spec.radii = vec![0, 1, 2, 3, 4, 5, 6, 8];
    let out = run_experiment_at(&spec, &manifest).map_err(|e| e.to_string())?;
    let t = out.get("boundary.csv").ok_or("boundary.csv missing")?;

    let mean_rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| cell(t, r, "row").as_deref() == Ok("mean")).collect();
    let base = mean_rows
        .iter()
        .find(|r| r[t.column("op").unwrap()] == "none")
        .ok_or("no unperturbed row")?;
    let base_acc = num(t, base, "ACC")?;
    let mut dilation: Vec<(usize, f64, f64)> = Vec::new();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for r in &mean_rows {
        let op = cell(t, r, "op")?;
        if op == "none" || cell(t, r, "ACC")?.is_empty() {
            continue;
        }
        let (radius, dice, acc) = (num(t, r, "radius")? as usize, num(t, r, "mean_dice")?, num(t, r, "ACC")?);
        if op == "dilate" {
            dilation.push((radius, dice, acc));
        }
        if radius > 0 {
            points.push((dice, acc));
        }
    }
    dilation.sort_by_key(|d| d.0);
    ensure!(
        dilation.windows(2).all(|w| w[1].1 < w[0].1),
        "dilation Dice not decreasing: {:?}",
        dilation.iter().map(|d| d.1).collect::<Vec<_>>()
    );

    let high: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 >= 0.9).collect();
    ensure!(!high.is_empty(), "no perturbed point with mean Dice >= 0.9");
    for &(d, a) in &high {
        ensure!((a - base_acc).abs() <= 3.0, "Dice {d:.3}: ACC {a:.2} vs unperturbed {base_acc:.2}");
    }
    let (d07, a07) = points
        .iter()
        .copied()
        .min_by(|x, y| (x.0 - 0.7).abs().total_cmp(&(y.0 - 0.7).abs()))
        .ok_or("no perturbed points")?;
    ensure!((d07 - 0.7).abs() <= 0.05, "closest point to Dice 0.7 is {d07:.3}");
    let high_min = high.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    ensure!(a07 < high_min, "ACC {a07:.2} at Dice {d07:.3} not below {high_min:.2} at Dice >= 0.9");
    let mut s = String::new();
    let _ = write!(s, "unperturbed ACC {base_acc:.2}; ");
    let _ = write!(s, "{} points at Dice >= 0.9 within 3; ", high.len());
    let _ = write!(s, "ACC {a07:.2} at Dice {d07:.3}");
    Ok(s)
}

fn warm_start() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = SynthConfig {
        n_benign: 60,
        n_malignant: 60,
        side: 64,
        seed: 1,
        dataset_tag: "A".into(),
        ..Default::default()
    };
    let b = SynthConfig {
        seed: 2,
        dataset_tag: "B".into(),
        ..a.clone()
    };
    let manifest = synth_generate_many(&[a, b], &dir.path().join("data")).map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(Workflow::Pretrain, dir.path().join("out"));
    spec.repeats = 3;
    spec.train.max_epochs = 15;
    let out = run_experiment_at(&spec, &manifest).map_err(|e| e.to_string())?;

    let first_epoch = |name: &str| -> Result<Vec<f64>, String> {
        let t = out.get(name).ok_or(format!("{name} missing"))?;
        t.rows
            .iter()
            .filter(|r| cell(t, r, "epoch").as_deref() == Ok("1"))
            .map(|r| num(t, r, "loss_r"))
            .collect()
    };
    let warm = first_epoch("loss_r_warm.csv")?;
    let cold = first_epoch("loss_r_cold.csv")?;
    ensure!(warm.len() == spec.repeats && cold.len() == spec.repeats, "expected one epoch-1 row per repeat");
    for (k, (w, c)) in warm.iter().zip(&cold).enumerate() {
        ensure!(w <= c, "repeat {k}: warm epoch-1 loss_r {w} above cold {c}");
    }
    let t = out.get("pretrain.csv").ok_or("pretrain.csv missing")?;
    let mean_acc = |start: &str| -> Result<f64, String> {
        let row = t
            .rows
            .iter()
            .find(|r| cell(t, r, "start").as_deref() == Ok(start) && cell(t, r, "row").as_deref() == Ok("mean"))
            .ok_or(format!("no mean row for {start}"))?;
        num(t, row, "ACC")
    };
    let (wa, ca) = (mean_acc("warm")?, mean_acc("cold")?);
    ensure!((wa - ca).abs() <= 5.0, "warm ACC {wa:.2} vs cold {ca:.2}");
    Ok(format!(
        "epoch-1 loss_r warm {:.3} vs cold {:.3} (mean); ACC warm {wa:.2} vs cold {ca:.2}",
        warm.iter().sum::<f64>() / warm.len() as f64,
        cold.iter().sum::<f64>() / cold.len() as f64
    ))
}

fn reproducibility_and_formats() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();

    // checkpoints
    let data = bfm_examples(4, 4, 16, 8);
    let mut model = SsdlModel::<f32>::build(ArchitectureConfig::with_side(16), 4).map_err(|e| e.to_string())?;
    ssdl_fit(&mut model, &data, &TrainConfig { max_epochs: 2, batch_size: 4, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let path = d.join("ckpt/model.ckpt");
    save_checkpoint(&model, &path).map_err(|e| e.to_string())?;
    let bytes = fs::read(&path).map_err(|e| e.to_string())?;
    ensure!(bytes == encode_checkpoint(&model), "file differs from the encoding");
    let loaded = load_checkpoint(&path).map_err(|e| e.to_string())?;
    ensure!(encode_checkpoint(&loaded) == bytes, "re-encoding differs");
    ensure!(
        changed_parameters(model.params(), loaded.params()).is_empty(),
        "parameters differ after reload"
    );
    for (a, b) in model.params().iter().zip(loaded.params().iter()) {
        let same = a.value().data().iter().zip(b.value().data()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure!(same && a.name() == b.name(), "{} not bitwise equal", a.name());
    }
    ensure!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err(), "truncated checkpoint accepted");

    // byte-identical reports
    let cfg = SynthConfig {
        n_benign: 10,
        n_malignant: 10,
        n_unlabeled: 4,
        side: 16,
        seed: 5,
        ..Default::default()
    };
    let manifest = synth_generate(&cfg, &d.join("data")).map_err(|e| e.to_string())?;
    let mut csvs = Vec::new();
    for run in ["one", "two"] {
        let mut files: Vec<Vec<u8>> = Vec::new();
        for workflow in [Workflow::Single, Workflow::Boundary] {
            let mut spec = ExperimentSpec::new(workflow, d.join(run).join(workflow.as_str()));
            spec.arch = ArchitectureConfig::with_side(16);
            spec.repeats = 2;
            spec.train.max_epochs = 2;
            spec.train.batch_size = 8;
            let out = run_experiment_at(&spec, &manifest).map_err(|e| e.to_string())?;
            files.extend(out.tables.iter().map(|(p, _)| fs::read(p).unwrap()));
        }
        csvs.push(files);
    }
    ensure!(!csvs[0].is_empty() && csvs[0] == csvs[1], "report CSVs differ between identical runs");
    read_table(&d.join("one/single/single.csv"))?;

    // manifest error classes
    let mf = d.join("mf");
    fs::create_dir_all(&mf).map_err(|e| e.to_string())?;
    for id in ["a", "b"] {
        pgm::write(&mf.join(format!("{id}.pgm")), 8, 8, &[100; 64]).map_err(|e| e.to_string())?;
        let mut m = [0u8; 64];
        m[36] = 255;
        pgm::write(&mf.join(format!("{id}_m.pgm")), 8, 8, &m).map_err(|e| e.to_string())?;
    }
    pgm::write(&mf.join("odd.pgm"), 8, 8, &[100; 64]).map_err(|e| e.to_string())?;
    pgm::write(&mf.join("odd_m.pgm"), 16, 16, &[255; 256]).map_err(|e| e.to_string())?;
    fs::write(mf.join("bad.pgm"), b"P2 1 1 255 0").map_err(|e| e.to_string())?;
    fs::copy(mf.join("a_m.pgm"), mf.join("bad_m.pgm")).map_err(|e| e.to_string())?;
    let line = |id: &str, label: &str, split: &str| format!("{id}\t{id}.pgm\t{id}_m.pgm\t{label}\t{split}\tA\n");
    let ok = line("a", "benign", "none");
    let cases = [
        ("missing header", line("a", "benign", "none"), 1),
        ("wrong header", format!("#other v9\n{ok}"), 1),
        ("field count", format!("{MANIFEST_HEADER}\n{ok}a2\ta.pgm\ta_m.pgm\tbenign\n"), 3),
        ("empty field", format!("{MANIFEST_HEADER}\n\ta.pgm\ta_m.pgm\tbenign\tnone\tA\n"), 2),
        ("bad label", format!("{MANIFEST_HEADER}\n{ok}{}", line("b", "Benign", "none")), 3),
        ("bad split", format!("{MANIFEST_HEADER}\n{}", line("a", "benign", "holdout")), 2),
        ("duplicate id", format!("{MANIFEST_HEADER}\n{ok}{ok}"), 3),
        ("dangling path", format!("{MANIFEST_HEADER}\n{ok}{}", line("zz", "benign", "none")), 3),
        ("corrupt raster", format!("{MANIFEST_HEADER}\n{}", line("bad", "benign", "none")), 2),
        ("size mismatch", format!("{MANIFEST_HEADER}\n{ok}{}", line("odd", "benign", "none")), 3),
    ];
    let p = mf.join("m.tsv");
    for (class, text, want) in &cases {
        fs::write(&p, text).map_err(|e| e.to_string())?;
        match load_manifest(&p) {
            Err(Error::Manifest { line, .. }) => ensure!(line == *want, "{class}: error at line {line}, expected {want}"),
            other => return Err(format!("{class}: expected a manifest error, got {other:?}")),
        }
    }
    Ok(format!("checkpoint bitwise; {} CSVs byte-identical; {} malformed classes rejected", csvs[0].len(), cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("edt_exactness", edt_exactness),
        ("bfm_correctness", bfm_correctness),
        ("gradient_suite", gradient_suite),
        ("metric_fidelity", metric_fidelity),
        ("freezing_laws", freezing_laws),
        ("overfit_sanity", overfit_sanity),
        ("method_ranking", method_ranking),
        ("boundary_degradation", boundary_degradation),
        ("warm_start", warm_start),
        ("reproducibility_and_formats", reproducibility_and_formats),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why}; {secs:.1} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
