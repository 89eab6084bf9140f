use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lmdp_irl_core::spp::StateRecording;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "lmdp-irl", version, about = "Forward and inverse solvers for linearly-solvable MDPs")]
pub struct Cli {
    /// Log verbosity on stderr.
    #[arg(long, value_enum, global = true, default_value = "info")]
    pub log: LogLevel,
    /// Worker thread cap. Falls back to LMDP_IRL_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Info,
    Debug,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate self-propelled particles under their optimal policy.
    SimulateSpp(SimulateArgs),
    /// Solve for the cost-to-go, lambda and optimal policy by Z-iteration.
    SolveForward(SolveArgs),
    /// Discretize raw trajectories into misalignment states and counts.
    Ingest(IngestArgs),
    /// Estimate the cost-to-go posterior from transition counts.
    Estimate(EstimateArgs),
    /// Turn a cost-to-go into state costs.
    RecoverCosts(RecoverArgs),
    /// Marginal cost-to-go curves of a 2-D summary.
    Marginals(MarginalsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateSpp(_) => "simulate-spp",
            Command::SolveForward(_) => "solve-forward",
            Command::Ingest(_) => "ingest",
            Command::Estimate(_) => "estimate",
            Command::RecoverCosts(_) => "recover-costs",
            Command::Marginals(_) => "marginals",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Recording {
    Sampled,
    Realized,
}

impl From<Recording> for StateRecording {
    fn from(r: Recording) -> Self {
        match r {
            Recording::Sampled => StateRecording::Sampled,
            Recording::Realized => StateRecording::Realized,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub agents: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Interaction radius on the unit square.
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Turning noise, degrees.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record the sampled target state or the re-binned realized state.
    #[arg(long, value_enum, default_value = "sampled")]
    pub recording: Recording,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    /// Row-stochastic J x J matrix.
    #[arg(long)]
    pub passive: PathBuf,
    /// State costs, length J.
    #[arg(long)]
    pub costs: PathBuf,
    #[arg(long, default_value_t = lmdp_irl_core::lmdp::DEFAULT_Z_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = lmdp_irl_core::lmdp::DEFAULT_Z_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Columns experiment_id,agent_id,t,x,y.
    #[arg(long)]
    pub csv: PathBuf,
    /// Bounds and target point in the same units as the CSV.
    #[arg(long)]
    pub arena: Option<PathBuf>,
    #[arg(long, default_value_t = 36)]
    pub bins: usize,
    /// Whether an agent's own heading enters its local mean.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub self_include: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Mcmc,
    Vi,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub counts: PathBuf,
    /// A matrix CSV, `uniform`, `rw:SD_DEG` or `spp[:SIGMA_DEG]`.
    #[arg(long, default_value = "spp")]
    pub passive: String,
    /// `identity`, `gaussian:SPACING:BW_DEG[:planar]` or
    /// `bisquare[:N1,N2,...][:planar]`.
    #[arg(long, default_value = "identity")]
    pub features: String,
    #[arg(long, value_enum, default_value = "mcmc")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bins per angular dimension, used to infer the state grid.
    #[arg(long, default_value_t = 36)]
    pub bins: usize,
    /// State count for sparse count tables (default: bins squared).
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub vi_iter: usize,
    /// Draws from the variational approximation.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Also write the dense feature matrix.
    #[arg(long)]
    pub write_features: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RecoverArgs {
    /// A cost-to-go vector or an `estimate` summary (its `mean` column).
    #[arg(long)]
    pub ctg: PathBuf,
    /// Same forms as `estimate --passive`.
    #[arg(long)]
    pub passive: String,
    /// A number or a file holding one. Without it, costs are anchored to
    /// minimum 0.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long, default_value_t = 36)]
    pub bins: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MarginalsArgs {
    /// `ctg_summary.csv` of a 2-D estimate.
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long, default_value_t = 36)]
    pub bins: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}
