//! Bayesian inverse estimation of costs-to-go from transition counts.
//!
//! The posterior is over `(β, log τ)` with `v = X β`:
//!
//! ```text
//! y_ij | v  ~  p*_ij(v)^{y_ij}       (optimal LMDP policy)
//! β | τ     ~  N(0, τ⁻¹ I)
//! τ         ~  Gamma(shape 0.1, rate 0.1)
//! ```
//!
//! Samplers are written against [`LogDensity`] so they can be checked on
//! Gaussian targets with closed-form answers.

mod diagnostics;
mod map;
mod model;
mod nuts;
mod summary;
mod vi;

pub use diagnostics::{effective_sample_size, split_rhat};
pub use map::{find_map, MapConfig, MapResult};
pub use model::{GammaPrior, IrlModel, ParameterVector};
pub use nuts::{combine_chains, run_chain, sample_mcmc, ChainResult, NutsConfig};
pub use summary::{quantile_sorted, summarize, CostToGoSummary};
pub use vi::{fit_variational, fit_variational_target, VariationalConfig, VariationalFit};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// A differentiable log density on `R^dim`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Returns `log p(x)` and writes `∇ log p(x)` into `grad`.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mcmc,
    Variational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub step_size: f64,
    pub mean_accept: f64,
    pub divergences: usize,
    pub leapfrog_steps: usize,
    pub max_depth_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcDiagnostics {
    pub chains: Vec<ChainDiagnostics>,
    pub divergences: usize,
    pub divergence_fraction: f64,
    pub mean_accept: f64,
    /// Smallest effective sample size over parameters.
    pub min_ess: f64,
    /// Largest potential scale reduction over parameters.
    pub max_rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalDiagnostics {
    /// Mean ELBO estimate per window of iterations.
    pub elbo_trace: Vec<f64>,
    pub elbo_window: usize,
    /// ELBO of the final (averaged) approximation.
    pub final_elbo: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Diagnostics {
    Mcmc(McmcDiagnostics),
    Variational(VariationalDiagnostics),
}

/// Posterior draws over `(β, log τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub draws: Vec<ParameterVector>,
    /// Chain index per draw (always 0 for variational draws).
    pub chain: Vec<usize>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}
