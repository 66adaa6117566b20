//! Command implementations behind the `dense-points` binary.
//!
//! Each `cmd_*` function writes its artifacts plus a [`RunManifest`] and
//! returns the in-memory result, so the commands are usable from tests and
//! examples without spawning a process. Floats in CSV output use Rust's
//! shortest round-trip formatting, which makes repeated runs byte-identical.

pub mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::gps::io::{per_instance_csv, per_instance_rows, read_instances, RecordKind};
use crate::gps::{ap_over_thresholds, default_thresholds, ApReport, GpsConfig, Similarity};
use crate::gradcheck::{check_gradient, GradcheckOptions, GradcheckReport, GradientUnderTest};
use crate::loss::{self, LossKind, Residual};
use crate::sim::{
    divergence_sweep, train, Outcome, SweepTable, SyntheticTask, TrainResult, TERM_NAMES,
};

pub use config::{SweepFile, TrainFile};

/// Records how an output was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// The fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    fn new(subcommand: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &to_json(self))
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `foo.csv` gets `foo.csv.manifest.json`.
pub fn sidecar_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn loss_config(kind: LossKind) -> serde_json::Value {
    match kind {
        LossKind::DensePoint(p) => json!({"kind": "dense_point", "omega": p.omega()}),
        LossKind::SmoothL1 => json!({"kind": "smooth_l1"}),
    }
}

/// Parameters of `dense-points losscurve`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurveArgs {
    pub kind: LossKind,
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
    pub out: PathBuf,
}

/// One tabulated residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCurveRow {
    pub x: f64,
    pub loss: f64,
    pub grad: f64,
    /// The typeset derivative: `ω|x|/(1+x²)` and `ω` for dense points,
    /// `|x|` and `1` for Smooth-L1.
    pub printed_grad: f64,
}

/// Tabulates loss, exact gradient and typeset gradient at
/// `x_min, x_min + step, …` up to `x_max`.
pub fn loss_curve(kind: LossKind, x_min: f64, x_max: f64, step: f64) -> Result<Vec<LossCurveRow>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid("step", "must be finite and positive"));
    }
    if !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
        return Err(Error::invalid(
            "x_range",
            "must be a finite interval with min <= max",
        ));
    }
    let n = ((x_max - x_min) / step + 1e-9).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(Error::invalid(
            "step",
            "range/step exceeds ten million rows",
        ));
    }
    (0..n)
        .map(|i| {
            let x = x_min + i as f64 * step;
            let r = Residual::new(x)?;
            let printed_grad = match kind {
                LossKind::DensePoint(p) => loss::printed_dense_point_grad(r, p),
                LossKind::SmoothL1 => loss::printed_smooth_l1_grad(r),
            };
            Ok(LossCurveRow {
                x,
                loss: kind.loss(r),
                grad: kind.grad(r),
                printed_grad,
            })
        })
        .collect()
}

pub fn cmd_losscurve(args: &LossCurveArgs) -> Result<Vec<LossCurveRow>> {
    let rows = loss_curve(args.kind, args.x_min, args.x_max, args.step)?;
    let mut csv = String::from("x,loss,grad,printed_grad\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?},{:?}",
            r.x, r.loss, r.grad, r.printed_grad
        );
    }
    write_file(&args.out, &csv)?;

    let mut manifest = RunManifest::new(
        "losscurve",
        json!({
            "loss": loss_config(args.kind),
            "x_min": args.x_min,
            "x_max": args.x_max,
            "step": args.step,
        }),
        None,
    );
    manifest.outputs.push(display(&args.out));
    manifest.write(&sidecar_manifest_path(&args.out))?;
    Ok(rows)
}

/// Parameters of `dense-points gradcheck`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckArgs {
    pub gradient: GradientUnderTest,
    pub options: GradcheckOptions,
    /// Where to write the JSON report; nothing is written when absent.
    pub out: Option<PathBuf>,
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<GradcheckReport> {
    let report = check_gradient(args.gradient, &args.options)?;
    if let Some(out) = &args.out {
        write_file(out, &to_json(&report))?;
        let mut manifest = RunManifest::new(
            "gradcheck",
            json!({"gradient": args.gradient.label(), "options": args.options}),
            Some(args.options.seed),
        );
        manifest.outputs.push(display(out));
        manifest.write(&sidecar_manifest_path(out))?;
    }
    Ok(report)
}

/// Contents of `summary.json` written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub loss: String,
    pub weighting: String,
    pub iterations: usize,
    pub initial_total: Option<f64>,
    pub final_total: Option<f64>,
    pub final_losses: BTreeMap<String, f64>,
}

fn curve_csv(result: &TrainResult) -> String {
    let mut csv = String::from("iter,lr");
    for prefix in ["loss_", "weight_"] {
        for name in TERM_NAMES {
            let _ = write!(csv, ",{prefix}{name}");
        }
    }
    csv.push_str(",total\n");
    for r in &result.records {
        let _ = write!(csv, "{},{:?}", r.iter, r.lr);
        for v in r.losses.iter().chain(&r.weights) {
            let _ = write!(csv, ",{v:?}");
        }
        let _ = writeln!(csv, ",{:?}", r.total);
    }
    csv
}

/// Runs one simulated training job and writes `curve.csv`, `summary.json`
/// and `manifest.json` into `out_dir`.
pub fn cmd_train(config_path: &Path, out_dir: &Path) -> Result<TrainSummary> {
    let file = TrainFile::from_toml_str(&read_file(config_path)?)?;
    run_train(&file, Some(config_path), out_dir)
}

/// [`cmd_train`] for an already parsed configuration.
pub fn run_train(
    file: &TrainFile,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<TrainSummary> {
    let (params, cfg) = file.build()?;
    let task = SyntheticTask::generate(&params)?;
    let result = train(&task, &cfg)?;

    let summary = TrainSummary {
        outcome: result.outcome,
        loss: cfg.loss.label(),
        weighting: cfg.weighting.label(),
        iterations: result.records.len(),
        initial_total: result.initial_total(),
        final_total: result.final_total(),
        final_losses: result
            .final_losses()
            .map(|l| TERM_NAMES.iter().map(|n| n.to_string()).zip(l).collect())
            .unwrap_or_default(),
    };

    let curve = out_dir.join("curve.csv");
    let summary_path = out_dir.join("summary.json");
    write_file(&curve, &curve_csv(&result))?;
    write_file(&summary_path, &to_json(&summary))?;

    let mut manifest = RunManifest::new(
        "train",
        serde_json::to_value(file).expect("config serialises"),
        Some(cfg.seed),
    );
    manifest.inputs.extend(config_path.map(display));
    manifest.outputs = vec![display(&curve), display(&summary_path)];
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(summary)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    lr_grid: &'a [f64],
    lr_max: Vec<serde_json::Value>,
}

fn sweep_csv(table: &SweepTable) -> String {
    let mut csv = String::from("variant,lr,outcome,diverged_at,iterations,final_total\n");
    for r in &table.rows {
        let (outcome, at) = match r.outcome {
            Outcome::Completed => ("completed", String::new()),
            Outcome::Diverged { iter } => ("diverged", iter.to_string()),
        };
        let _ = writeln!(
            csv,
            "{},{:?},{},{},{},{:?}",
            r.variant, r.lr, outcome, at, r.iterations, r.final_total
        );
    }
    csv
}

/// Runs a divergence sweep and writes `sweep.csv`, `summary.json` (LRmax per
/// variant) and `manifest.json` into `out_dir`.
pub fn cmd_sweep(config_path: &Path, out_dir: &Path) -> Result<SweepTable> {
    let file = SweepFile::from_toml_str(&read_file(config_path)?)?;
    run_sweep(&file, Some(config_path), out_dir)
}

/// [`cmd_sweep`] for an already parsed configuration.
pub fn run_sweep(
    file: &SweepFile,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<SweepTable> {
    let (params, base, grid, variants) = file.build()?;
    let task = SyntheticTask::generate(&params)?;
    let table = divergence_sweep(&task, &base, &grid, &variants)?;

    let csv_path = out_dir.join("sweep.csv");
    let summary_path = out_dir.join("summary.json");
    write_file(&csv_path, &sweep_csv(&table))?;
    let summary = SweepSummary {
        lr_grid: &grid,
        lr_max: table
            .lr_max
            .iter()
            .map(|(name, lr)| json!({"variant": name, "lr_max": lr}))
            .collect(),
    };
    write_file(&summary_path, &to_json(&summary))?;

    let mut manifest = RunManifest::new(
        "sweep",
        serde_json::to_value(file).expect("config serialises"),
        Some(base.seed),
    );
    manifest.inputs.extend(config_path.map(display));
    manifest.outputs = vec![display(&csv_path), display(&summary_path)];
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(table)
}

/// Parameters of `dense-points eval-gps`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGpsArgs {
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub kappa: f64,
    /// COCO thresholds 0.50:0.05:0.95 when absent.
    pub thresholds: Option<Vec<f64>>,
    pub similarity: Similarity,
    pub out: PathBuf,
    pub per_instance: Option<PathBuf>,
}

/// Scores predictions against ground truth and writes the AP report as JSON.
///
/// Predictions for images absent from the ground truth are kept and count as
/// false positives.
pub fn cmd_eval_gps(args: &EvalGpsArgs) -> Result<ApReport> {
    let thresholds = args.thresholds.clone().unwrap_or_else(default_thresholds);
    let cfg = GpsConfig::with_kappa(args.kappa)?.with_thresholds(thresholds.clone())?;
    let gts = read_instances(&args.gt, RecordKind::GroundTruth)?;
    let preds = read_instances(&args.pred, RecordKind::Prediction)?;
    let report = ap_over_thresholds(&gts, &preds, &cfg, args.similarity)?;
    write_file(&args.out, &to_json(&report))?;

    let mut manifest = RunManifest::new(
        "eval-gps",
        json!({
            "kappa": args.kappa,
            "thresholds": thresholds,
            "similarity": args.similarity,
        }),
        None,
    );
    manifest.inputs = vec![display(&args.gt), display(&args.pred)];
    manifest.outputs.push(display(&args.out));
    if let Some(path) = &args.per_instance {
        let rows = per_instance_rows(&gts, &preds, &cfg, args.similarity)?;
        write_file(path, &per_instance_csv(&rows))?;
        manifest.outputs.push(display(path));
    }
    manifest.write(&sidecar_manifest_path(&args.out))?;
    Ok(report)
}

/// Which configuration `print-config` shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Train,
    Sweep,
}

/// The default configuration as TOML, every field present.
pub fn print_config(kind: ConfigKind) -> String {
    match kind {
        ConfigKind::Train => TrainFile::default().to_toml_string(),
        ConfigKind::Sweep => SweepFile::default().to_toml_string(),
    }
}
