//! Run directories: `config.json`, per-fold checkpoints, `report.json`,
//! `history.csv` and the SVG learning curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xraycnn_core::evaluation::FoldResult;
use xraycnn_core::{CvResult, Error, Label, LabeledDataset, Lineage, MetricsReport, NetworkSpec, Result, RunHistory, TrainConfig};

pub const CONFIG: &str = "config.json";
pub const REPORT: &str = "report.json";
pub const HISTORY: &str = "history.csv";
pub const LOSS_SVG: &str = "loss.svg";
pub const ACCURACY_SVG: &str = "accuracy.svg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub status: RunStatus,
    pub data: PathBuf,
    pub threads: usize,
    pub spec: NetworkSpec,
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub source_id: String,
    pub lineage: Lineage,
    pub label: Label,
    pub predicted: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub checkpoint: String,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: MetricsReport,
    pub history: RunHistory,
    pub test: Vec<TestRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: NetworkSpec,
    pub train: TrainConfig,
    pub folds: Vec<FoldReport>,
    pub pooled: MetricsReport,
}

pub fn checkpoint_name(fold: usize) -> String {
    format!("fold_{fold:02}.ckpt")
}

fn fold_report(f: &FoldResult, ds: &LabeledDataset) -> FoldReport {
    FoldReport {
        fold: f.fold,
        checkpoint: checkpoint_name(f.fold),
        train_size: f.train_indices.len(),
        test_size: f.test_indices.len(),
        metrics: f.metrics.clone(),
        history: f.history.clone(),
        test: f
            .test_indices
            .iter()
            .zip(&f.predictions)
            .zip(&f.scores)
            .map(|((&i, &predicted), &score)| {
                let s = &ds.samples[i];
                TestRecord {
                    source_id: s.source_id.clone(),
                    lineage: s.lineage,
                    label: s.label,
                    predicted,
                    score,
                }
            })
            .collect(),
    }
}

impl RunReport {
    pub fn from_cv(cv: &CvResult, ds: &LabeledDataset) -> Self {
        Self {
            spec: cv.spec.clone(),
            train: cv.config.clone(),
            folds: cv.folds.iter().map(|f| fold_report(f, ds)).collect(),
            pooled: cv.pooled.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(Error::MissingFile { path: path.to_path_buf() });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    read_json(path)
}

/// Loads `report.json` from a run whose `config.json` is marked complete.
pub fn read_report(run: &Path) -> Result<RunReport> {
    let config = read_config(&run.join(CONFIG))?;
    if config.status != RunStatus::Complete {
        return Err(Error::Data(format!(
            "run at {} is incomplete{}",
            run.display(),
            config.error.map(|e| format!(" ({e})")).unwrap_or_default()
        )));
    }
    read_json(&run.join(REPORT))
}

pub fn history_csv(report: &RunReport) -> String {
    let mut out = String::from("fold,epoch,train_loss,train_acc,val_loss,val_acc\n");
    for f in &report.folds {
        for e in &f.history.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                f.fold, e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            )
            .unwrap();
        }
    }
    out
}

const FOLD_COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Line chart with one polyline per series over epochs 1..=n.
pub fn svg_chart(title: &str, y_label: &str, series: &[Vec<f64>]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let n = series.iter().map(Vec::len).max().unwrap_or(0).max(2);
    let finite = series.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |i: usize| left + pw * i as f64 / (n - 1) as f64;
    let y = |v: f64| top + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0).unwrap();
    writeln!(
        s,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + ph,
        left + pw,
        top + ph
    )
    .unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + ph).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">epoch</text>"#, left + pw / 2.0, h - 12.0).unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 18 {})">{y_label}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();
    for (v, anchor) in [(lo, top + ph), (hi, top)] {
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{v:.3}</text>"#, left - 6.0, anchor + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{left}" y="{}" text-anchor="middle" font-size="10">1</text>"#, top + ph + 14.0).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{n}</text>"#, left + pw, top + ph + 14.0).unwrap();
    for (k, values) in series.iter().enumerate() {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>fold {k}</title></polyline>"#,
            FOLD_COLORS[k % FOLD_COLORS.len()],
            points.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// `(loss chart, accuracy chart)` of the training series, one polyline per fold.
pub fn learning_curves(report: &RunReport) -> (String, String) {
    let series = |f: fn(&xraycnn_core::training::EpochRecord) -> f64| -> Vec<Vec<f64>> {
        report.folds.iter().map(|fold| fold.history.epochs.iter().map(f).collect()).collect()
    };
    (
        svg_chart("Training loss per fold", "loss", &series(|e| e.train_loss)),
        svg_chart("Training accuracy per fold", "accuracy", &series(|e| e.train_accuracy)),
    )
}
