use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use graphlp::eval::BaselineKind;
use graphlp_cli::commands::{cmd_baseline, cmd_eval, cmd_split, cmd_sweep, cmd_train, SweepParam};
use graphlp_cli::RunConfig;

/// Six 5-cliques joined in a ring, plus a few chords.
fn write_graph(dir: &Path) -> PathBuf {
    let mut text = String::from("# nodes: 30\n");
    for c in 0..6 {
        let base = c * 5;
        for i in 0..5 {
            for j in (i + 1)..5 {
                writeln!(text, "{} {}", base + i, base + j).unwrap();
            }
        }
        writeln!(text, "{} {}", base + 4, (base + 5) % 30).unwrap();
    }
    text.push_str("0 15\n7 22\n");
    let p = dir.join("cliques.edges");
    std::fs::write(&p, text).unwrap();
    p
}

fn small_config(dataset: &Path, out: &Path) -> RunConfig {
    RunConfig {
        output: Some(out.to_path_buf()),
        t: 6,
        epochs: 4,
        hidden: 8,
        layers: 2,
        learning_rate: 0.01,
        ..RunConfig::preset(dataset.to_path_buf(), None)
    }
}

#[test]
fn split_writes_observed_and_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let s = cmd_split(&g, 0.9, 3, &dir.path().join("split")).unwrap();
    assert_eq!(s.observed_edges + s.holdout_edges, 68);
    assert_eq!(s.observed_edges, 61);
    let first = std::fs::read(dir.path().join("split/observed.edges")).unwrap();
    cmd_split(&g, 0.9, 3, &dir.path().join("again")).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("again/observed.edges")).unwrap());
    let all = cmd_split(&g, 1.0, 3, &dir.path().join("all")).unwrap();
    assert_eq!(all.holdout_edges, 0);
}

#[test]
fn train_eval_baseline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let out = dir.path().join("run");
    let run = cmd_train(&small_config(&g, &out)).unwrap();
    for f in ["model.ckpt", "history.csv", "metrics.json", "ranked_missing.csv", "record.json", "dataset/manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(run.history.records.len(), 4);
    assert_eq!(std::fs::read_to_string(out.join("history.csv")).unwrap().lines().count(), 5);
    let ranked = std::fs::read_to_string(out.join("ranked_missing.csv")).unwrap();
    assert_eq!(ranked.lines().count(), 1 + 30 * 29 / 2);
    assert!(run.record.metrics.precision_spurious.is_some());

    let eval = cmd_eval(&out.join("model.ckpt"), &out.join("dataset/manifest.json"), &dir.path().join("eval")).unwrap();
    assert_eq!(eval.report, run.record.metrics);

    let cn = cmd_baseline(BaselineKind::Cn, &out.join("dataset/manifest.json"), &dir.path().join("base")).unwrap();
    assert!((0.0..=1.0).contains(&cn.auc));
    assert!(dir.path().join("base/metrics_cn.json").is_file());
}

#[test]
fn eval_rejects_node_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let out = dir.path().join("run");
    cmd_train(&small_config(&g, &out)).unwrap();
    let other = dir.path().join("small.edges");
    std::fs::write(&other, "0 1\n1 2\n2 3\n3 0\n0 2\n1 3\n3 4\n4 5\n5 0\n2 5\n").unwrap();
    let mut cfg = small_config(&other, &dir.path().join("small"));
    cfg.keep_fraction = 0.8;
    cfg.t = 3;
    cmd_train(&cfg).unwrap();
    let err = cmd_eval(&out.join("model.ckpt"), &dir.path().join("small/dataset/manifest.json"), &dir.path().join("e")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_train(&small_config(&g, &a)).unwrap();
    cmd_train(&small_config(&g, &b)).unwrap();
    for f in ["history.csv", "model.ckpt", "metrics.json", "ranked_missing.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let base = RunConfig {
        epochs: 2,
        ..small_config(&g, dir.path())
    };
    let out = dir.path().join("sweep");
    let rows = cmd_sweep(SweepParam::Depth, &[1.0, 2.0, 3.0], &base, 2, &out).unwrap();
    assert_eq!(rows.len(), 3);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("depth,auc,ap,precision,best_epoch\n"));
    assert!(out.join("depth_2/model.ckpt").is_file());
    assert_eq!(cmd_sweep(SweepParam::Lambda, &[], &base, 1, &out).unwrap_err().exit_code(), 2);
    assert_eq!(cmd_sweep(SweepParam::Depth, &[1.5], &base, 1, &out).unwrap_err().exit_code(), 2);
}

fn graphlp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graphlp"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let missing = graphlp().args(["train", "--dataset", "/nonexistent/graph.edges"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));

    let unknown = graphlp()
        .args(["train", "--dataset"])
        .arg(&g)
        .args(["--set", "learning_rat=0.1"])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let ok = graphlp()
        .args(["train", "--dataset"])
        .arg(&g)
        .args(["--output"])
        .arg(dir.path().join("bin"))
        .args(["--epochs", "2", "--set", "t=4", "--set", "hidden=4"])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bin/record.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["epochs"], 2);
    assert_eq!(record["config"]["learning_rate"], 0.0005);
    assert_eq!(record["epochs_run"], 2);
}
