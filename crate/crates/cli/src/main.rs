//! `hetnet`: predictor, simulator and curve metric for small-noise diffusions
//! near heteroclinic networks.

mod compare;
mod manifest;
mod metric;
mod predict;
mod simulate;
mod system;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Process exit codes.
pub mod code {
    pub const PASS: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const COMPARISON_FAIL: u8 = 3;
    pub const CENSORING: u8 = 4;
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Self { code: code::USAGE, error: e.into() }
    }

    pub fn validation(e: impl Into<anyhow::Error>) -> Self {
        Self { code: code::VALIDATION, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: code::USAGE, error }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hetnet", version, about = "Limiting jump processes of small-noise diffusions near heteroclinic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Options shared by commands that load a system.
#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    /// Builtin name (krupa-cubic, linear-saddle-2d, cellular-2d) or network file
    #[arg(long)]
    pub system: String,
    /// Builtin parameters as key=value pairs, e.g. `preset=cycling` or `a1=-1,a2=-2,a3=-0.5`
    #[arg(long)]
    pub params: Option<String>,
    /// Start point `x1,x2,...` or `anchor:NAME:SIGN:FRAC` (default: the system's anchor)
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Number of saddle passages
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Seed for all randomness
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sequence probabilities, dwell times and exit measure of the limiting process
    Predict(predict::PredictArgs),
    /// Monte Carlo ensembles of the diffusion, one directory per epsilon
    Simulate(simulate::SimulateArgs),
    /// Compares a prediction report with simulated ensembles
    Compare(compare::CompareArgs),
    /// Distance between two curves, optionally with a proximity verdict
    Metric(metric::MetricArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE } else { code::PASS });
        }
    };
    let outcome = match cli.command {
        Command::Predict(a) => predict::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Compare(a) => compare::run(&a),
        Command::Metric(a) => metric::run(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
