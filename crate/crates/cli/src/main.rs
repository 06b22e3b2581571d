//! `langevin`: simulate, fit, sample, classify and replicate from the shell.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use langevin_core::simulate::GridStyle;
use langevin_core::WindowMode;

#[derive(Parser, Debug)]
#[command(name = "langevin", version, about = "Polynomial-drift Langevin models for price series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an ensemble of paths from a fixed drift model.
    Simulate(SimulateArgs),
    /// Select the drift order per window by AIC.
    Fit(FitArgs),
    /// Sample the posterior per window and emit potential bands.
    Sample(SampleArgs),
    /// Label every window with a dynamical regime.
    Classify(ClassifyArgs),
    /// Run a synthetic recovery experiment and report PASS/FAIL.
    Replicate(ReplicateArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Input series file (price-csv or quote-csv); repeatable.
    #[arg(long, short)]
    pub input: Vec<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// JSON configuration file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest drift order considered.
    #[arg(long)]
    pub qmax: Option<usize>,
    #[arg(long, value_enum)]
    pub window: Option<WindowArg>,
    #[arg(long)]
    pub walkers: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowArg {
    Monthly,
    WholeSeries,
}

impl From<WindowArg> for WindowMode {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Monthly => WindowMode::Monthly,
            WindowArg::WholeSeries => WindowMode::WholeSeries,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridArg {
    Equidistant,
    Jittered,
}

impl From<GridArg> for GridStyle {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Equidistant => GridStyle::Equidistant,
            GridArg::Jittered => GridStyle::Jittered,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Drift order; must match the number of coefficients.
    #[arg(long)]
    pub q: Option<usize>,
    /// Drift coefficients α₁..α_q, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Number of paths.
    #[arg(long)]
    pub n: Option<usize>,
    /// Observations per path.
    #[arg(long)]
    pub len: Option<usize>,
    /// Mean time step [default: 0.1].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Initial price [default: 1].
    #[arg(long)]
    pub s0: Option<f64>,
    /// Time grid [default: jittered].
    #[arg(long, value_enum)]
    pub grid: Option<GridArg>,
    /// Write one long-format `path_id,time,value` file instead of one file per path.
    #[arg(long)]
    pub long: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write the chosen-order counts across all windows.
    #[arg(long)]
    pub order_histogram: bool,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sample at this order instead of the AIC choice.
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    OrderRecovery,
    ParameterRecovery,
}

#[derive(Args, Debug)]
pub struct ReplicateArgs {
    #[arg(value_enum)]
    pub which: Experiment,
    #[command(flatten)]
    pub common: Common,
    /// Paths per ensemble.
    #[arg(long)]
    pub n: Option<usize>,
    /// Observations per path.
    #[arg(long)]
    pub len: Option<usize>,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
    Partial,
}

impl Outcome {
    pub fn from_counts(ok: usize, bad: usize) -> Self {
        match (ok, bad) {
            (0, _) => Outcome::Failure,
            (_, 0) => Outcome::Success,
            _ => Outcome::Partial,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Replicate(a) => commands::replicate(&a),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Ok(Outcome::Failure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
