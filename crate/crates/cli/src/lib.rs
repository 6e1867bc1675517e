//! Command-line front end: `assess`, `calibrate`, `eval` and `synth`.

pub mod commands;
pub mod fsio;
pub mod report;
pub mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "anastomosis",
    version,
    about = "Geometric assessment of anastomosis annotations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect errors in annotation files and write reports and SVG overlays.
    Assess(AssessArgs),
    /// Fit thresholds to expert scores over a directory of annotations.
    Calibrate(CalibrateArgs),
    /// Score detector output against ground-truth annotations (AP).
    Eval(EvalArgs),
    /// Generate synthetic annotated scenes with known errors.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Threshold config (TOML); built-in defaults when omitted.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub expected_stitches: usize,
    /// Annotation files, or directories of `*.json` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Score table (CSV: image_id, rater_id, trial_id, e1..e5).
    #[arg(long)]
    pub scores: PathBuf,
    /// Drop images whose scores differ between these two trials.
    #[arg(long, value_delimiter = ',', num_args = 1, value_names = ["T1,T2"])]
    pub clean: Option<Vec<String>>,
    /// Trial to calibrate on; defaults to the first `--clean` trial or the only trial.
    #[arg(long)]
    pub trial: Option<String>,
    /// Rater to calibrate on; defaults to the only rater.
    #[arg(long)]
    pub rater: Option<String>,
    #[arg(long, default_value_t = anastomosis_core::calibration::DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 8)]
    pub expected_stitches: usize,
    /// Threshold config to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of annotation files.
    pub annotations: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec (TOML, or JSON by extension); defaults when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Generate this many random scenes around the spec instead of the spec itself.
    #[arg(long)]
    pub count: Option<usize>,
    /// Most injections per error type in random scenes.
    #[arg(long, default_value_t = 4)]
    pub max_injections: usize,
    /// Most stitches added to the spec's count in random scenes.
    #[arg(long, default_value_t = 0)]
    pub extra_stitches: usize,
}

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Partial = 2,
    Fatal = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

/// Failure that ends a command; `status` picks the exit code.
#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            status: Status::Usage,
            error: error.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self {
            status: Status::Fatal,
            error: e.into(),
        }
    }
}

pub fn run(cli: Cli) -> Status {
    let result = match cli.command {
        Command::Assess(a) => commands::assess::run(&a),
        Command::Calibrate(a) => commands::calibrate::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Synth(a) => commands::synth::run(&a),
    };
    match result {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            e.status
        }
    }
}

/// Parses `args` and runs the command; usage errors map to [`Status::Usage`].
pub fn main_with_args<I, T>(args: I) -> Status
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                Status::Usage
            } else {
                Status::Success
            }
        }
    }
}
