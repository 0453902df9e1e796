//! End-to-end behaviour of the `xraycnn` binary.

mod common;

use std::fs;

use common::*;
use xraycnn_cli::run::{RunConfig, RunReport, RunStatus};
use xraycnn_cli::{experiment_from_args, Cli, Command};
use xraycnn_core::evaluation::ConfusionMatrix;
use xraycnn_core::{Head, MetricsReport, NetworkSpec, TrainConfig};

fn prepared(per_class: usize, side: usize, augment: bool) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    raw_edge_density(&raw, per_class, side, 1);
    let mut args = vec!["prepare", "--input", p(&raw), "--output"];
    let out = dir.path().join("prep");
    args.push(p(&out));
    args.extend(["--seed", "3", "--input-size", "16"]);
    if !augment {
        args.push("--no-augment");
    }
    ok(&args);
    dir
}

#[test]
fn prepare_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    raw_edge_density(&raw, 4, 24, 2);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let text = ok(&["prepare", "--input", p(&raw), "--output", p(&a), "--seed", "5", "--input-size", "16"]);
    assert!(text.contains("prepared 32 samples"), "{text}");
    assert!(text.contains("class covid 16") && text.contains("lineage rotation 8"), "{text}");
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_xraycnn"))
        .args(["prepare", "--input", p(&raw), "--output", p(&b), "--input-size", "16"])
        .env("XRAYCNN_SEED", "5")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = ok(&["prepare", "--input", p(&raw), "--output", p(&c), "--no-augment", "--input-size", "16"]);
    assert!(text.contains("prepared 8 samples"), "{text}");

    let mut files: Vec<_> = fs::read_dir(a.join("samples")).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 32);
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    for f in files {
        assert_eq!(fs::read(a.join("samples").join(&f)).unwrap(), fs::read(b.join("samples").join(&f)).unwrap());
    }
}

#[test]
fn train_defaults_match_reference_hyperparameters() {
    let cli = <Cli as clap::Parser>::try_parse_from(["xraycnn", "train", "--data", "d", "--out", "o"]).unwrap();
    let Command::Train(a) = cli.command else { panic!("not train") };
    let (spec, cfg) = experiment_from_args(&a, 64).unwrap();
    assert_eq!(spec, NetworkSpec::default());
    assert_eq!(cfg, TrainConfig::default());
    assert_eq!((cfg.epochs, cfg.batch_size, cfg.folds), (100, 32, 10));
    assert_eq!((cfg.learning_rate, cfg.validation_fraction, spec.dropout_rate), (0.001, 0.2, 0.2));
    assert_eq!(spec.conv_blocks.iter().map(|b| b.kernel_count).collect::<Vec<_>>(), [128, 256]);
    assert_eq!(spec.dense_widths, [64, 32, 16]);
}

#[test]
fn train_report_and_exports() {
    let dir = prepared(6, 20, true);
    let prep = dir.path().join("prep");
    let run = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&prep), "--out", p(&run), "--folds", "3", "--epochs", "4", "--head", "svm", "--sobel", "on", "--batch", "8"];
    args.extend(TINY);
    let text = ok(&args);
    assert!(text.contains("svm+sobel") && text.contains("accuracy"), "{text}");

    let cfg: RunConfig = serde_json::from_slice(&fs::read(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg.status, RunStatus::Complete);
    assert_eq!(cfg.spec.head, Head::Svm);
    assert!(cfg.train.sobel);
    for k in 0..3 {
        assert!(run.join(format!("fold_{k:02}.ckpt")).is_file());
    }

    let csv = ok(&["report", "--run", p(&run), "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fold,epoch,train_loss,train_acc,val_loss,val_acc"));
    assert_eq!(lines.count(), 3 * 4);
    assert_eq!(csv, fs::read_to_string(run.join("history.csv")).unwrap());

    let json = ok(&["report", "--run", p(&run), "--format", "json"]);
    let rep: RunReport = serde_json::from_str(&json).unwrap();
    let summed: ConfusionMatrix = rep.folds.iter().map(|f| f.metrics.confusion).sum();
    assert_eq!(summed, rep.pooled.confusion);
    // leak-free default: only originals are tested
    assert_eq!(rep.pooled.confusion.total(), 12);

    let svg_dir = dir.path().join("charts");
    let listed = ok(&["report", "--run", p(&run), "--format", "svg", "--out", p(&svg_dir)]);
    assert_eq!(listed.lines().count(), 2);
    for name in ["loss.svg", "accuracy.svg"] {
        let svg = fs::read_to_string(svg_dir.join(name)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3, "{name}");
    }
}

#[test]
fn zero_epochs_and_rerun_from_config() {
    let dir = prepared(5, 20, false);
    let prep = dir.path().join("prep");
    let run = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&prep), "--out", p(&run), "--folds", "5", "--epochs", "0", "--seed", "11"];
    args.extend(TINY);
    ok(&args);
    let csv = ok(&["report", "--run", p(&run), "--format", "csv"]);
    assert_eq!(csv.lines().count(), 1);
    let rep: RunReport = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep.pooled.confusion.total(), 10);

    let again = dir.path().join("again");
    let config = run.join("config.json");
    ok(&["train", "--config", p(&config), "--out", p(&again)]);
    assert_eq!(fs::read(run.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());
}

#[test]
fn threads_do_not_change_results() {
    let dir = prepared(6, 20, false);
    let prep = dir.path().join("prep");
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let run = dir.path().join(format!("run{threads}"));
        let mut args = vec!["train", "--data", p(&prep), "--out", p(&run), "--folds", "3", "--epochs", "3", "--threads", threads];
        args.extend(TINY);
        ok(&args);
        reports.push(fs::read(run.join("report.json")).unwrap());
        reports.push(fs::read(run.join("fold_02.ckpt")).unwrap());
    }
    assert_eq!(reports[0], reports[2]);
    assert_eq!(reports[1], reports[3]);
}

#[test]
fn overfit_model_scores_its_training_fold_perfectly_and_predict_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    raw_edge_density(&raw, 10, 32, 7);
    let prep = dir.path().join("prep");
    ok(&["prepare", "--input", p(&raw), "--output", p(&prep), "--no-augment", "--input-size", "32"]);
    let run = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&prep), "--out", p(&run), "--folds", "2", "--epochs", "200", "--seed", "7"];
    args.extend(TINY);
    ok(&args);

    // raw tree holding exactly fold 0's training images
    let rep: RunReport = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    let held: Vec<&str> = rep.folds[0].test.iter().map(|t| t.source_id.as_str()).collect();
    let train_raw = dir.path().join("train_raw");
    for class in ["covid", "normal"] {
        fs::create_dir_all(train_raw.join(class)).unwrap();
        for e in fs::read_dir(raw.join(class)).unwrap() {
            let name = e.unwrap().file_name().into_string().unwrap();
            let id = format!("{class}/{name}");
            if !held.contains(&id.as_str()) {
                fs::copy(raw.join(&id), train_raw.join(&id)).unwrap();
            }
        }
    }
    let model = run.join("fold_00.ckpt");
    let m: MetricsReport = serde_json::from_str(&ok(&["evaluate", "--model", p(&model), "--data", p(&train_raw)])).unwrap();
    assert_eq!(m.confusion.total(), 10);
    assert_eq!(m.accuracy, 1.0, "{m:?}");

    // per-image predictions reproduce evaluate's confusion counts
    let mut cm = ConfusionMatrix::default();
    for class in ["covid", "normal"] {
        for e in fs::read_dir(raw.join(class)).unwrap() {
            let path = e.unwrap().path();
            let line = ok(&["predict", "--model", p(&model), "--image", p(&path)]);
            assert_eq!(line, ok(&["predict", "--model", p(&model), "--image", p(&path)]));
            let score: f64 = line.trim().rsplit("score=").next().unwrap().parse().unwrap();
            assert!(score > 0.0 && score < 1.0);
            match (line.starts_with("label=covid"), class == "covid") {
                (true, true) => cm.tp += 1,
                (false, false) => cm.tn += 1,
                (true, false) => cm.fp += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
    }
    let all: MetricsReport = serde_json::from_str(&ok(&["evaluate", "--model", p(&model), "--data", p(&raw)])).unwrap();
    assert_eq!(all.confusion, cm);
    let via_prepared: MetricsReport = serde_json::from_str(&ok(&["evaluate", "--model", p(&model), "--data", p(&prep)])).unwrap();
    assert_eq!(via_prepared.confusion, cm);
}

fn assert_error(args: &[&str], code: i32, tag: &str) -> String {
    let o = xraycnn(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{tag}]: ")), "{err}");
    err
}

#[test]
fn error_paths_are_single_tagged_lines() {
    let dir = prepared(5, 20, false);
    let prep = dir.path().join("prep");
    let tmp = dir.path();

    assert_error(&["train", "--data", p(&prep)], 2, "E_USAGE");
    assert_error(&["train", "--data", p(&prep), "--out", p(&tmp.join("x")), "--head", "rbf"], 2, "E_USAGE");
    assert_error(&["train", "--data", p(&prep), "--out", p(&tmp.join("x")), "--val", "1.5"], 2, "E_USAGE");
    assert_error(&["frobnicate"], 2, "E_USAGE");

    let empty = tmp.join("empty");
    fs::create_dir_all(&empty).unwrap();
    let e = assert_error(&["prepare", "--input", p(&empty), "--output", p(&tmp.join("o"))], 3, "E_DATA");
    assert!(e.contains("empty"), "{e}");
    assert_error(&["train", "--data", p(&empty), "--out", p(&tmp.join("x"))], 3, "E_DATA");

    // a model for the remaining checks
    let run = tmp.join("run");
    let mut args = vec!["train", "--data", p(&prep), "--out", p(&run), "--folds", "2", "--epochs", "1"];
    args.extend(TINY);
    ok(&args);
    let model = run.join("fold_00.ckpt");

    let e = assert_error(&["evaluate", "--model", p(&model), "--data", p(&empty)], 3, "E_DATA");
    assert!(e.contains("covid"), "{e}");
    let big = tmp.join("big");
    fs::create_dir_all(&big).unwrap();
    raw_edge_density(&tmp.join("raw24"), 3, 24, 1);
    ok(&["prepare", "--input", p(&tmp.join("raw24")), "--output", p(&big), "--input-size", "24", "--no-augment"]);
    let e = assert_error(&["evaluate", "--model", p(&model), "--data", p(&big)], 3, "E_DATA");
    assert!(e.contains("24") && e.contains("16"), "{e}");

    assert_error(&["predict", "--model", p(&model), "--image", p(&tmp.join("nope.png"))], 3, "E_DATA");
    let junk = tmp.join("junk.png");
    fs::write(&junk, b"\x89PNG\r\n\x1a\nnot really").unwrap();
    assert_error(&["predict", "--model", p(&model), "--image", p(&junk)], 3, "E_DATA");
    assert_error(&["predict", "--model", p(&tmp.join("none.ckpt")), "--image", p(&junk)], 5, "E_IO");

    let mut bytes = fs::read(&model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    let bad = tmp.join("bad.ckpt");
    fs::write(&bad, bytes).unwrap();
    assert_error(&["evaluate", "--model", p(&bad), "--data", p(&prep)], 5, "E_IO");

    assert_error(&["report", "--run", p(&tmp.join("missing")), "--format", "json"], 3, "E_DATA");
}

#[test]
fn divergence_marks_run_incomplete() {
    let dir = prepared(5, 20, false);
    let prep = dir.path().join("prep");
    let run = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&prep), "--out", p(&run), "--folds", "2", "--epochs", "5", "--lr", "1e38", "--head", "svm"];
    args.extend(TINY);
    assert_error(&args, 4, "E_DIVERGED");
    let cfg: RunConfig = serde_json::from_slice(&fs::read(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg.status, RunStatus::Incomplete);
    assert!(cfg.error.unwrap().contains("diverged"));
    let e = assert_error(&["report", "--run", p(&run), "--format", "csv"], 3, "E_DATA");
    assert!(e.contains("incomplete"), "{e}");
}
