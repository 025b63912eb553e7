use std::path::Path;
use std::process::{Command, Output};

use birads_ssdl::harness::load_manifest;
use birads_ssdl::network::load_checkpoint;
use birads_ssdl::report::Table;

fn bssdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bssdl")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&bssdl(&["--help"])), 0);
    assert_eq!(code(&bssdl(&["--version"])), 0);
    assert_eq!(code(&bssdl(&[])), 1);
    assert_eq!(code(&bssdl(&["frobnicate"])), 1);
    assert_eq!(code(&bssdl(&["train", "--manifest", "x.tsv"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = bssdl(&["eval", "--manifest", s(&d.join("none.tsv")), "--model", "m", "--out", "o.csv"]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("none.tsv"));

    let synth = bssdl(&["synth", "--out", s(&d.join("data")), "--n-benign", "4", "--n-malignant", "4", "--input-size", "16"]);
    assert_eq!(code(&synth), 0);
    let manifest = d.join("data/manifest.tsv");
    let bad_lr = bssdl(&["train", "--manifest", s(&manifest), "--out", s(&d.join("m.ckpt")), "--lr", "-1"]);
    assert_eq!(code(&bad_lr), 1);
    let bad_side = bssdl(&["synth", "--out", s(&d.join("x")), "--input-size", "24"]);
    assert_eq!(code(&bad_side), 1);
    let bad_variant = bssdl(&["report", "--workflow", "single", "--variant", "nope", "--manifest", s(&manifest), "--out", "o"]);
    assert_eq!(code(&bad_variant), 1);
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--input-size", "16", "--batch", "8"];
    let run = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend_from_slice(&common);
        let o = bssdl(&all);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    let o = bssdl(&[
        "synth", "--out", s(&d.join("data")), "--n-benign", "10", "--n-malignant", "10", "--n-unlabeled", "2",
        "--tags", "A,B", "--input-size", "16",
    ]);
    assert!(o.status.success());
    let manifest = d.join("data/manifest.tsv");
    assert_eq!(load_manifest(&manifest).unwrap().records.len(), 44);

    let o = bssdl(&["bfm", "--manifest", s(&manifest), "--out", s(&d.join("bfm")), "--input-size", "16"]);
    assert!(o.status.success());
    let bfm_manifest = load_manifest(&d.join("bfm/manifest.tsv")).unwrap();
    assert_eq!(bfm_manifest.records.len(), 44);

    let ckpt = d.join("model.ckpt");
    run(&["train", "--manifest", s(&manifest), "--out", s(&ckpt), "--epochs", "2"]);
    assert_eq!(load_checkpoint(&ckpt).unwrap().config().input_side, 16);
    let curve = Table::parse(&std::fs::read_to_string(d.join("model.loss.csv")).unwrap()).unwrap();
    assert_eq!(curve.rows.len(), 2);

    let warm = d.join("warm.ckpt");
    run(&["train", "--manifest", s(&manifest), "--out", s(&warm), "--epochs", "1", "--init", s(&ckpt), "--tag", "B"]);

    let metrics = d.join("metrics.csv");
    run(&["eval", "--manifest", s(&manifest), "--model", s(&ckpt), "--out", s(&metrics)]);
    let t = Table::parse(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.column("MCC").is_some());

    run(&["perturb", "--manifest", s(&manifest), "--model", s(&ckpt), "--out", s(&d.join("p")), "--radii", "0,1"]);
    let p = Table::parse(&std::fs::read_to_string(d.join("p/boundary.csv")).unwrap()).unwrap();
    assert_eq!(p.rows.len(), 5);

    run(&[
        "sweep-sigma", "--manifest", s(&manifest), "--out", s(&d.join("s")), "--grid", "10,20", "--repeats", "1",
        "--epochs", "1", "--tag", "A",
    ]);
    assert!(d.join("s/sigma_sweep.csv").exists());

    run(&[
        "report", "--workflow", "pretrain", "--manifest", s(&manifest), "--out", s(&d.join("r")), "--repeats", "1",
        "--epochs", "1",
    ]);
    assert!(d.join("r/pretrain.csv").exists());
    assert!(d.join("r/loss_r_warm.csv").exists());
}
