//! `rpcd`: run the relative arc density test on point files, tabulate
//! moment and efficacy curves, and drive Monte Carlo experiments.

mod commands;
mod input;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rpcd::{OutsidePolicy, RFactor};

/// A mistake in how the command was invoked rather than in its data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// How a command that did not fail ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The statistic has zero null variance; no z or p-values exist.
    Degenerate,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "rpcd",
    version,
    about = "r-factor proximity catch digraph tests for spatial segregation and association"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test points X against anchor points Y with the relative arc density.
    Test(TestArgs),
    /// Tabulate a moment, efficacy or power curve over r as CSV.
    Curves(CurvesArgs),
    /// Run a seeded Monte Carlo experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Outside {
    Reject,
    Drop,
}

impl From<Outside> for OutsidePolicy {
    fn from(o: Outside) -> Self {
        match o {
            Outside::Reject => OutsidePolicy::Reject,
            Outside::Drop => OutsidePolicy::Drop,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct TestArgs {
    /// Anchor points (CSV, two columns, optional `x,y` header).
    #[arg(long)]
    pub y: PathBuf,
    /// Data points, same format.
    #[arg(long)]
    pub x: PathBuf,
    /// Expansion factor: decimal, fraction or `inf`.
    #[arg(long, value_parser = input::parse_r)]
    pub r: RFactor,
    /// What to do with data points outside the convex hull of Y.
    #[arg(long, value_enum, default_value_t = Outside::Reject)]
    pub outside: Outside,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Mu,
    Nu,
    PaeSeg,
    PaeAssoc,
    HlaeSeg,
    HlaeAssoc,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AltFlag {
    Seg,
    Assoc,
}

#[derive(clap::Args, Debug)]
pub struct CurvesArgs {
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    #[arg(long, value_parser = input::parse_r, default_value = "1")]
    pub r_min: RFactor,
    #[arg(long, value_parser = input::parse_r, default_value = "5")]
    pub r_max: RFactor,
    /// Evenly spaced grid points; breakpoints in range are added.
    #[arg(long, default_value_t = 401)]
    pub steps: usize,
    /// Corner depth ε: decimal, fraction or e.g. `sqrt3/8`.
    #[arg(long, value_parser = input::parse_eps)]
    pub eps: Option<f64>,
    /// Sample size, for power.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Alternative for power.
    #[arg(long, value_enum, default_value_t = AltFlag::Seg)]
    pub alt: AltFlag,
    /// Triangle weights or areas, one per line.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Lattice resolution for alternative variances without a closed form.
    #[arg(long, default_value_t = rpcd::alternatives::numeric::DEFAULT_RESOLUTION)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    Null,
    Seg,
    Assoc,
}

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub mode: ModeFlag,
    #[arg(long, value_parser = input::parse_eps)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub reps: usize,
    /// Comma-separated r values, e.g. `1,11/10,2,inf`.
    #[arg(long, required = true, value_delimiter = ',', value_parser = input::parse_r)]
    pub r: Vec<RFactor>,
    #[arg(long, env = "PCD_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Anchor points; without it the data live in the standard triangle.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Write every replicate's ρ to this CSV file.
    #[arg(long)]
    pub emit_samples: Option<PathBuf>,
    /// Also report critical values and power from a null run with the same seed.
    #[arg(long)]
    pub empirical_critical: bool,
    /// Worker threads; the output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Test(a) => commands::test(a),
        Command::Curves(a) => commands::curves(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match outcome {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Degenerate) => {
            eprintln!("warning: the statistic is degenerate at this r; no z or p-values");
            ExitCode::from(EXIT_DEGENERATE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
