mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use calibkit_core::CalibError;
use clap::{Args, Parser, Subcommand};

/// Post-hoc calibration of classifier logits.
#[derive(Debug, Parser)]
#[command(name = "calibkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a calibrator on validation logits and evaluate it on test logits.
    Calibrate(CalibrateArgs),
    /// Export a reliability table for (optionally calibrated) logits.
    Reliability(ReliabilityArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run generate, fit and evaluate over a range of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Γ for class-wise temperature scaling; `inf` decouples the classes.
    #[arg(long, default_value = "inf")]
    pub gamma: String,
    /// Lower bound of the temperature search interval.
    #[arg(long, default_value_t = 0.01)]
    pub alpha_lo: f64,
    /// Upper bound of the temperature search interval.
    #[arg(long, default_value_t = 100.0)]
    pub alpha_hi: f64,
    /// Classes with fewer validation records fall back to the shared temperature.
    #[arg(long, default_value_t = 10)]
    pub min_class_samples: usize,
    /// Number of equal-width confidence bins.
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// none, ts, cts or vs.
    #[arg(long)]
    pub method: String,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Where to write the JSON evaluation report.
    #[arg(long)]
    pub report: PathBuf,
    /// Where to write the fitted model as JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Print the summary table in percent instead of fractions.
    #[arg(long)]
    pub percent: bool,
    /// Recorded in the report; fitting itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Model JSON produced by `calibrate --model`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Two-atom binary data with class-conditional label flips.
    Dnoisy(DnoisyArgs),
    /// Three-atom sample-size experiment; writes a per-trial results table.
    Theorem1(Theorem1Args),
    /// Per-class heterogeneous logits split into train, validation and test.
    Hetero(HeteroArgs),
}

#[derive(Debug, Args)]
pub struct DnoisyArgs {
    #[arg(long)]
    pub p_plus: f64,
    #[arg(long)]
    pub p_minus: f64,
    /// Flip rate of the matching test distribution, recorded in the sidecar.
    #[arg(long)]
    pub p_test: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output stem; writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Theorem1Args {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Size of the large sample as a multiple of n.
    #[arg(long, default_value_t = 50)]
    pub large_multiplier: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct HeteroSpecArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 1000)]
    pub per_class: usize,
    /// One value, two values (first half / second half of the classes) or one per class.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub scales: Vec<f64>,
    /// Label-noise rates, broadcast like `--scales`.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub noise: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.0)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub val_fraction: f64,
}

#[derive(Debug, Args)]
pub struct HeteroArgs {
    #[command(flatten)]
    pub spec: HeteroSpecArgs,
    #[arg(long)]
    pub seed: u64,
    /// Output stem; writes `<out>_{train,val,test}.csv` and `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// noise, size, gamma or n_val.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated axis values, or `start:stop:step`.
    #[arg(long)]
    pub range: String,
    #[command(flatten)]
    pub spec: HeteroSpecArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    /// Maps a library error, naming the file it came from when known.
    pub fn from_core(err: CalibError, file: Option<&std::path::Path>) -> Self {
        let code = match err {
            CalibError::DimensionMismatch { .. } => 3,
            CalibError::Optimization { .. } => 4,
            _ => 2,
        };
        let message = match file {
            Some(f) => format!("{}: {err}", f.display()),
            None => err.to_string(),
        };
        Self { code, message }
    }
}

impl From<CalibError> for Failure {
    fn from(err: CalibError) -> Self {
        Failure::from_core(err, None)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CALIBKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::input(format!("CALIBKIT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::input(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Calibrate(args) => commands::calibrate(&args),
        Command::Reliability(args) => commands::reliability(&args),
        Command::Synth(args) => commands::synth(&args),
        Command::Sweep(args) => commands::sweep(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("calibkit: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
