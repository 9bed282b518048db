use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "szbf", version, about = "Check stochastic zeroing barrier functions for Itô SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sampled check of SZBF conditions (i) and (ii).
    Check(CheckArgs),
    /// Lemma 1 hypotheses plus drift-only and SZBF checks on shared samples.
    Lemma1(CheckArgs),
    /// Euler–Maruyama paths and exit statistics.
    Simulate(SimArgs),
    /// Exit statistics only.
    ExitProb(SimArgs),
    /// Lyapunov conditions for V_C and a stability-in-probability profile.
    Stability(StabilityArgs),
    /// Text summary of one or more JSON outputs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Grid points per axis (endpoints included).
    #[arg(long, default_value_t = 101, value_parser = positive_usize)]
    pub grid: usize,
    /// Extra uniform random points on top of the grid.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    /// Relative tolerance factor for the zero tests.
    #[arg(long, default_value_t = 1e-9, value_parser = positive_f64)]
    pub tol: f64,
    /// Check only the summed coupling (literal form of condition (ii)).
    #[arg(long)]
    pub sum_only: bool,
}

#[derive(Debug, Args)]
pub struct SimSettings {
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub dt: f64,
    #[arg(long, default_value_t = 10.0, value_parser = positive_f64)]
    pub horizon: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; with `--format csv` the CSV goes here and the JSON to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Seed for random samples and regularity estimates.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Fixed initial point; uniform over D ∩ C when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[command(flatten)]
    pub sim: SimSettings,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Distance levels, increasing.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.5", value_parser = positive_f64)]
    pub eps: Vec<f64>,
    /// Initial distances outside C, increasing; 0 starts inside C.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1", value_parser = nonnegative_f64)]
    pub dist: Vec<f64>,
    #[command(flatten)]
    pub sim: SimSettings,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON outputs of earlier runs.
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err("must be positive and finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(_) => Err("must be non-negative and finite".into()),
        Err(e) => Err(e.to_string()),
    }
}
