//! Command-line front end for `chainstat`.

pub mod commands;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use commands::run;

/// Parse `args` (program name first) and run, as the binary does.
pub fn run_from<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| commands::InputError(e.to_string()))?;
    run(cli)
}

/// Environment variable holding the default worker-thread budget.
pub const THREADS_ENV: &str = "CHAINSTAT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "chainstat", version, about = "Completion-time, error-count and key-rate statistics")]
pub struct Cli {
    /// Maximum parallel workers; all available cores when unset.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Completion-time distribution `t, p_t, cdf`.
    Pmf(PmfArgs),
    /// Mean, variance and 99th percentile of the completion time.
    Moments(MomentsArgs),
    /// Distribution of a counter at a fixed completion time.
    Errors(ErrorsArgs),
    /// Secret key rate of the bunched two-level repeater.
    Innsbruck(InnsbruckArgs),
    /// Minimum memory lifetimes over a grid of link probabilities.
    Thresholds(ThresholdArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Power,
    Residue,
    Auto,
}

#[derive(Debug, Args, Serialize)]
pub struct PmfArgs {
    /// Process graph in JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub t_max: usize,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `residue` refuses the power-series fallback when a pole is repeated.
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ErrorsArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Completion time to condition on.
    #[arg(long)]
    pub t: usize,
    /// Per-traversal error probability for the non-heralded error.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Counter to report; the first one declared when absent.
    #[arg(long)]
    pub counter: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InnsbruckMode {
    /// One row per bunch size: `q0, K, K_simplified`.
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Optional,
    Mandatory,
}

#[derive(Debug, Args, Serialize)]
pub struct InnsbruckArgs {
    #[arg(value_enum)]
    pub mode: Option<InnsbruckMode>,
    /// Bunch size, a list such as `2,4`, or an inclusive range such as `2..8`.
    #[arg(long, default_value = "4")]
    pub q0: String,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Memory error per time step.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_w: f64,
    #[arg(long, default_value_t = 0.95)]
    pub f_init: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps_l: f64,
    /// Comma-separated distillation floors to search.
    #[arg(long, value_delimiter = ',', default_value = "0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9")]
    pub lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Strategy::Optional)]
    pub strategy: Strategy,
    /// Report only the simplified rate and skip sampling.
    #[arg(long)]
    pub simplified: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 8)]
    pub sections: usize,
    /// Section length in km.
    #[arg(long = "L", default_value_t = 25.0)]
    pub length_km: f64,
    #[arg(long, default_value_t = 0.95)]
    pub f_init: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_l: f64,
    /// `start:stop:count`, endpoints included.
    #[arg(long, default_value = "0.1:0.9:17")]
    pub p_grid: String,
    /// Use fixed waiting times instead of order-statistic bounds.
    #[arg(long, conflicts_with = "both")]
    pub no_statistical: bool,
    /// Emit both modes.
    #[arg(long)]
    pub both: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
