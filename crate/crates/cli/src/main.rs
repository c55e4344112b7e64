//! `optmc`: Monte Carlo option pricing and model diagnostics.
//!
//! Five subcommands: `sweep` prices an American-option grid, `compare`
//! runs every continuation estimator on one contract next to binomial
//! and European references, `metrics` scores a predictions file,
//! `correlate` summarizes an options-chain CSV, and `train` fits a
//! recurrent network to quote columns.
//!
//! Exit codes: 0 on success, 1 on runtime failures (I/O, divergence),
//! 2 on configuration or schema errors.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::table::OutputFormat;

/// Seed used when neither `--seed` nor a config file provides one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "optmc",
    version,
    about = "Monte Carlo option pricing with regression-based early exercise"
)]
struct Cli {
    /// Base RNG seed; grid cells derive per-cell streams from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for path simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Rendering for the primary output file and stdout.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Directory for output files (default: $OPTMC_OUT_DIR, else cwd).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Append an elapsed_ms column to pricing outputs.
    #[arg(long, global = true)]
    emit_timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price an American option over a spot/vol/maturity grid.
    Sweep(commands::SweepArgs),
    /// Price one contract with every estimator plus reference methods.
    Compare(commands::CompareArgs),
    /// Score a predictions CSV: confusion metrics, ROC and PR curves.
    Metrics(commands::MetricsArgs),
    /// Correlation matrix over numeric columns of an options-chain CSV.
    Correlate(commands::CorrelateArgs),
    /// Fit an LSTM or GRU to quote columns and report validation error.
    Train(commands::TrainArgs),
}

/// CLI failure split by exit code: bad configuration or input schema
/// (exit 2) versus runtime trouble such as I/O or divergence (exit 1).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub(crate) fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        runtime(err.to_string())
    }
}

impl From<optmc::market::MarketError> for CliError {
    fn from(err: optmc::market::MarketError) -> Self {
        config(err.to_string())
    }
}

impl From<optmc::paths::PathError> for CliError {
    fn from(err: optmc::paths::PathError) -> Self {
        use optmc::paths::PathError::*;
        match err {
            NotPositiveDefinite { .. } | ZeroPaths | ZeroSteps | InvalidMaturity(_)
            | Market(_) => config(err.to_string()),
        }
    }
}

impl From<optmc::lsm::LsmError> for CliError {
    fn from(err: optmc::lsm::LsmError) -> Self {
        use optmc::lsm::LsmError::*;
        match err {
            Market(_) | Path(_) | WrongStyle { .. } | InvalidConfig(_) => {
                config(err.to_string())
            }
            EstimatorFailure { .. } | EmptyDataset => runtime(err.to_string()),
        }
    }
}

impl From<optmc::data::DataError> for CliError {
    fn from(err: optmc::data::DataError) -> Self {
        use optmc::data::DataError::*;
        match err {
            Io(_) => runtime(err.to_string()),
            Csv(_) | MissingColumn(_) | TypeError { .. } | CrossedMarket { .. }
            | OutOfRange { .. } | UnknownColumn(_) | TooFewRows { .. } => {
                config(err.to_string())
            }
        }
    }
}

impl From<optmc::metrics::MetricsError> for CliError {
    fn from(err: optmc::metrics::MetricsError) -> Self {
        use optmc::metrics::MetricsError::*;
        match err {
            Io(_) => runtime(err.to_string()),
            LengthMismatch { .. } | NonBinaryInput(_) | ScoreOutOfRange(_) | EmptyInput => {
                config(err.to_string())
            }
        }
    }
}

impl From<optmc::recurrent::RecurrentError> for CliError {
    fn from(err: optmc::recurrent::RecurrentError) -> Self {
        use optmc::recurrent::RecurrentError::*;
        match err {
            InvalidConfig(_) | InsufficientData { .. } => config(err.to_string()),
            ShapeMismatch { .. } | NonFiniteLoss { .. } | Io(_) | Parse(_) => {
                runtime(err.to_string())
            }
        }
    }
}

/// Global options resolved from flags and environment.
pub struct Common {
    /// `--seed` if given; commands fall back to [`DEFAULT_SEED`] after
    /// merging any config file.
    pub seed: Option<u64>,
    pub format: OutputFormat,
    pub out_dir: PathBuf,
    pub emit_timing: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config("threads: must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| runtime(format!("thread pool: {e}")))?;
    }
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os("OPTMC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let common = Common {
        seed: cli.seed,
        format: cli.format.unwrap_or_default(),
        out_dir,
        emit_timing: cli.emit_timing,
    };
    match &cli.command {
        Command::Sweep(args) => commands::run_sweep(args, &common),
        Command::Compare(args) => commands::run_compare(args, &common),
        Command::Metrics(args) => commands::run_metrics(args, &common),
        Command::Correlate(args) => commands::run_correlate(args, &common),
        Command::Train(args) => commands::run_train(args, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
