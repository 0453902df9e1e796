//! `xraycnn` command-line front end.

pub mod checkpoint;
pub mod data;
pub mod run;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xraycnn_core::dataset::PrepareConfig;
use xraycnn_core::evaluation::{cross_validate, report};
use xraycnn_core::imaging::{load_image, resize_bilinear, to_network_input};
use xraycnn_core::nn::predict_one;
use xraycnn_core::training::{evaluate, predicted_label};
use xraycnn_core::{Error, ErrorClass, Head, LeakageMode, Lineage, MetricsReport, NetworkSpec, Result, Tensor, TrainConfig};

use checkpoint::Checkpoint;
use run::{RunConfig, RunReport, RunStatus};

pub const SEED_ENV: &str = "XRAYCNN_SEED";

#[derive(Debug, Parser)]
#[command(name = "xraycnn", version, about = "Edge-filtered CNN chest X-ray classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest covid/ and normal/ images, augment and cache them.
    Prepare(PrepareArgs),
    /// Cross-validate one experiment arm and write a run directory.
    Train(TrainArgs),
    /// Score a checkpoint on a prepared or raw data directory.
    Evaluate(EvaluateArgs),
    /// Classify a single image.
    Predict(PredictArgs),
    /// Export a finished run as CSV, JSON or SVG curves.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long, default_value_t = 64)]
    pub input_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Sigmoid,
    Svm,
}

impl From<HeadArg> for Head {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Sigmoid => Head::Sigmoid,
            HeadArg::Svm => Head::Svm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PaperFaithful,
    LeakFree,
}

impl From<ModeArg> for LeakageMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PaperFaithful => LeakageMode::PaperFaithful,
            ModeArg::LeakFree => LeakageMode::LeakFree,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared data directory.
    #[arg(long, required_unless_present = "config")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Re-run the experiment recorded in a config.json; other experiment flags are ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = HeadArg::Sigmoid)]
    pub head: HeadArg,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    pub sobel: Switch,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::LeakFree)]
    pub mode: ModeArg,
    /// Folds trained concurrently; 1 is the sequential reference path.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Kernel count of each conv block.
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 256])]
    pub kernels: Vec<usize>,
    /// Width of each hidden dense layer.
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 32, 16])]
    pub dense: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Unstratified shuffled k-fold.
    #[arg(long)]
    pub plain_kfold: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Prepared directory or raw covid/ + normal/ tree.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Directory for the SVG files (defaults to the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Divergence => 4,
        ErrorClass::Io => 5,
    }
}

pub fn error_tag(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Usage => "E_USAGE",
        ErrorClass::Data => "E_DATA",
        ErrorClass::Divergence => "E_DIVERGED",
        ErrorClass::Io => "E_IO",
    }
}

/// One line: `error[E_...]: message`.
pub fn error_line(class: ErrorClass, message: &str) -> String {
    let flat: Vec<&str> = message.split_whitespace().collect();
    format!("error[{}]: {}", error_tag(class), flat.join(" "))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => cmd_prepare(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn lineage_name(l: Lineage) -> &'static str {
    match l {
        Lineage::Original => "original",
        Lineage::ShiftX => "shift_x",
        Lineage::ShiftY => "shift_y",
        Lineage::Rotation => "rotation",
    }
}

pub fn cmd_prepare(a: &PrepareArgs, out: &mut dyn Write) -> Result<()> {
    let config = PrepareConfig {
        side: a.input_size,
        seed: a.seed,
        augment: !a.no_augment,
        ..Default::default()
    };
    let m = data::prepare(&a.input, &a.output, &config)?;
    let mut text = format!("prepared {} samples at {}x{} in {}\n", m.total, m.side, m.side, a.output.display());
    for (class, n) in &m.classes {
        text += &format!("class {class} {n}\n");
    }
    for (lineage, n) in &m.lineages {
        text += &format!("lineage {} {n}\n", lineage_name(*lineage));
    }
    emit(out, &text)
}

/// Network spec and training config described by the flags; the input side
/// comes from the data.
pub fn experiment_from_args(a: &TrainArgs, input_side: usize) -> Result<(NetworkSpec, TrainConfig)> {
    let mut spec = NetworkSpec::with_widths(input_side, &a.kernels, &a.dense, a.head.into());
    spec.dropout_rate = a.dropout;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        validation_fraction: a.val,
        sobel: a.sobel == Switch::On,
        seed: a.seed,
        folds: a.folds,
        leakage_mode: a.mode.into(),
        stratified: !a.plain_kfold,
        ..Default::default()
    };
    spec.validate()?;
    config.validate()?;
    Ok((spec, config))
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let recorded = a.config.as_deref().map(run::read_config).transpose()?;
    let data_dir = match (&a.data, &recorded) {
        (Some(d), _) => d.clone(),
        (None, Some(r)) => r.data.clone(),
        (None, None) => return Err(Error::InvalidConfig("--data is required".into())),
    };
    let ds = data::load_prepared(&data_dir)?;
    let (spec, config) = match recorded {
        Some(r) => {
            if r.spec.input_side != ds.side {
                return Err(Error::Data(format!(
                    "recorded input size {} differs from data input size {}",
                    r.spec.input_side, ds.side
                )));
            }
            (r.spec, r.train)
        }
        None => experiment_from_args(a, ds.side)?,
    };

    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let config_path = a.out.join(run::CONFIG);
    let mut run_config = RunConfig {
        status: RunStatus::Incomplete,
        data: data_dir,
        threads: a.threads,
        spec: spec.clone(),
        train: config.clone(),
        error: None,
    };
    run::write_json(&config_path, &run_config)?;

    let cv = match cross_validate(&spec, &config, &ds, a.threads) {
        Ok(cv) => cv,
        Err(e) => {
            run_config.error = Some(e.to_string());
            run::write_json(&config_path, &run_config)?;
            return Err(e);
        }
    };
    for f in &cv.folds {
        let ckpt = Checkpoint::new(&spec, f.params.clone(), config.sobel, config.seed, f.fold);
        checkpoint::save(&ckpt, &a.out.join(run::checkpoint_name(f.fold)))?;
    }
    let rep = RunReport::from_cv(&cv, &ds);
    run::write_json(&a.out.join(run::REPORT), &rep)?;
    let csv_path = a.out.join(run::HISTORY);
    std::fs::write(&csv_path, run::history_csv(&rep)).map_err(|e| Error::io(&csv_path, e))?;
    run_config.status = RunStatus::Complete;
    run::write_json(&config_path, &run_config)?;

    let arm = format!(
        "{}{}",
        spec.head.as_str(),
        if config.sobel { "+sobel" } else { "" }
    );
    emit(out, &format!("run {} ({arm}, {} folds)\n{}", a.out.display(), cv.folds.len(), summary(&cv.pooled)))
}

/// Human-readable metric block.
pub fn summary(m: &MetricsReport) -> String {
    let c = &m.confusion;
    let mut s = format!("tp={} tn={} fp={} fn={}\n", c.tp, c.tn, c.fp, c.fn_);
    for (name, v) in [
        ("accuracy", m.accuracy),
        ("sensitivity", m.sensitivity),
        ("precision", m.precision),
        ("f1", m.f1),
        ("specificity", m.specificity),
        ("auc", m.auc),
        ("loss", m.loss),
    ] {
        s += &format!("{name:<12}{v:.4}\n");
    }
    if !m.degenerate.is_empty() {
        s += &format!("degenerate  {}\n", m.degenerate.join(","));
    }
    s
}

fn network_input(ckpt: &Checkpoint, image: &xraycnn_core::imaging::GrayImage) -> Result<Tensor<f32>> {
    to_network_input(image, ckpt.meta.sobel)
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = checkpoint::load(&a.model)?;
    let ds = data::load_any(&a.data, ckpt.meta.input_side)?;
    if ds.is_empty() {
        return Err(Error::Data(format!("no samples under {}", a.data.display())));
    }
    let inputs = ds
        .samples
        .iter()
        .map(|s| network_input(&ckpt, &s.image))
        .collect::<Result<Vec<_>>>()?;
    let labels = ds.labels();
    let e = evaluate(&ckpt.meta.spec, &ckpt.params, &inputs, &labels)?;
    let m = report(&e.predictions, &labels, &e.scores, e.loss)?;
    let mut text = serde_json::to_string_pretty(&m).expect("metrics serialize");
    text.push('\n');
    emit(out, &text)
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = checkpoint::load(&a.model)?;
    let raw = load_image(&a.image)?;
    let resized = resize_bilinear(&raw, ckpt.meta.input_side)?;
    let x = network_input(&ckpt, &resized)?;
    let y = predict_one(&ckpt.meta.spec, &ckpt.params, &x)?;
    let label = predicted_label(y.data());
    emit(out, &format!("label={} score={}\n", label.name(), y.data()[1]))
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let rep = run::read_report(&a.run)?;
    match a.format {
        Format::Csv => emit(out, &run::history_csv(&rep)),
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&rep).expect("report serializes");
            text.push('\n');
            emit(out, &text)
        }
        Format::Svg => {
            let dir = a.out.as_deref().unwrap_or(&a.run);
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let (loss, acc) = run::learning_curves(&rep);
            let mut text = String::new();
            for (name, svg) in [(run::LOSS_SVG, loss), (run::ACCURACY_SVG, acc)] {
                let path = dir.join(name);
                std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
                text += &format!("{}\n", path.display());
            }
            emit(out, &text)
        }
    }
}

/// Parses and runs `args`, returning the process exit code. Output goes to
/// `out`; the single error line goes to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{}", error_line(ErrorClass::Usage, first.trim_start_matches("error: ")));
            return 2;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", error_line(e.class(), &e.to_string()));
            exit_code(e.class())
        }
    }
}
