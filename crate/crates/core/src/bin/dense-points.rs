use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dense_points::gps::{Similarity, DEFAULT_KAPPA};
use dense_points::gradcheck::{GradcheckOptions, GradientUnderTest};
use dense_points::harness::{self, ConfigKind, EvalGpsArgs, GradcheckArgs, LossCurveArgs};
use dense_points::loss::{LossKind, LossParams};
use dense_points::Result;

#[derive(Parser)]
#[command(
    name = "dense-points",
    version,
    about = "Dense point losses, balanced weighting and GPS evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    DensePoint,
    SmoothL1,
    /// The typeset dense point derivative, checked against the dense point loss.
    PrintedDensePoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Gps,
    Gpsm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigArg {
    Train,
    Sweep,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate loss, gradient and typeset gradient over a residual range.
    Losscurve {
        #[arg(long, value_enum, default_value = "dense-point")]
        kind: Kind,
        #[arg(long, default_value_t = 0.25)]
        omega: f64,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a gradient with central differences of its loss.
    Gradcheck {
        #[arg(long, value_enum, default_value = "dense-point")]
        kind: Kind,
        #[arg(long, default_value_t = 0.25)]
        omega: f64,
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the synthetic simulator from a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sweep learning rates across loss/weighting variants.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// AP over GPS or GPSm thresholds for JSON-lines instance files.
    EvalGps {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        /// Comma-separated; 0.50:0.05:0.95 when omitted.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "gps")]
        similarity: SimilarityArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_instance: Option<PathBuf>,
    },
    /// Print a default configuration with every field filled in.
    PrintConfig {
        #[arg(value_enum, default_value = "train")]
        which: ConfigArg,
    },
}

fn loss_kind(kind: Kind, omega: f64) -> Result<LossKind> {
    match kind {
        Kind::DensePoint | Kind::PrintedDensePoint => LossKind::dense_point(omega),
        Kind::SmoothL1 => Ok(LossKind::SmoothL1),
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Losscurve {
            kind,
            omega,
            x_min,
            x_max,
            step,
            out,
        } => {
            let rows = harness::cmd_losscurve(&LossCurveArgs {
                kind: loss_kind(kind, omega)?,
                x_min,
                x_max,
                step,
                out: out.clone(),
            })?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Gradcheck {
            kind,
            omega,
            n_samples,
            seed,
            tolerance,
            out,
        } => {
            let gradient = match kind {
                Kind::PrintedDensePoint => {
                    GradientUnderTest::PrintedDensePoint(LossParams::new(omega)?)
                }
                _ => GradientUnderTest::Analytic(loss_kind(kind, omega)?),
            };
            let options = GradcheckOptions {
                n_samples,
                seed,
                tolerance,
                ..GradcheckOptions::default()
            };
            let r = harness::cmd_gradcheck(&GradcheckArgs {
                gradient,
                options,
                out,
            })?;
            println!(
                "{} {}: worst relative error {:e} at x = {}, worst absolute error {:e} at x = {}, {} of {} samples over tolerance {:e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.gradient,
                r.worst_relative_error,
                r.worst_relative_x,
                r.worst_absolute_error,
                r.worst_absolute_x,
                r.failures,
                r.n_samples,
                r.tolerance,
            );
            if !r.passed {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Train { config, out_dir } => {
            let s = harness::cmd_train(&config, &out_dir)?;
            let total = s
                .final_total
                .map_or("n/a".to_string(), |t| format!("{t:e}"));
            println!(
                "{:?} after {} iterations, final total {total}",
                s.outcome, s.iterations
            );
        }
        Command::Sweep { config, out_dir } => {
            let table = harness::cmd_sweep(&config, &out_dir)?;
            for (name, lr) in &table.lr_max {
                match lr {
                    Some(lr) => println!("{name}: LRmax {lr:e}"),
                    None => println!("{name}: diverged at every rate"),
                }
            }
        }
        Command::EvalGps {
            gt,
            pred,
            kappa,
            thresholds,
            similarity,
            out,
            per_instance,
        } => {
            let similarity = match similarity {
                SimilarityArg::Gps => Similarity::Gps,
                SimilarityArg::Gpsm => Similarity::Gpsm,
            };
            let r = harness::cmd_eval_gps(&EvalGpsArgs {
                gt,
                pred,
                kappa,
                thresholds,
                similarity,
                out,
                per_instance,
            })?;
            println!(
                "AP {:.6} over {} instances in {} images",
                r.ap, r.n_instances, r.n_images
            );
        }
        Command::PrintConfig { which } => {
            let kind = match which {
                ConfigArg::Train => ConfigKind::Train,
                ConfigArg::Sweep => ConfigKind::Sweep,
            };
            print!("{}", harness::print_config(kind));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
