//! Subcommand bodies. Each returns the inputs to digest and the seed used.

pub mod estimate;
pub mod ingest;
pub mod marginals;
pub mod recover;
pub mod simulate;
pub mod solve;

use std::path::{Path, PathBuf};

use lmdp_irl_core::basis::{
    bisquare_basis_2d, default_bisquare_levels, gaussian_basis_1d, identity_features, BisquareLevel, FeatureMatrix,
    Metric,
};
use lmdp_irl_core::lmdp::PassiveDynamics;
use lmdp_irl_core::spp::{spp_passive_dynamics, SppConfig};
use lmdp_irl_core::trajectory::{random_walk_passive, uniform_passive};
use lmdp_irl_core::{Axis, StateGrid};

use crate::error::{CliError, CliResult, CoreContext};
use crate::formats::read_matrix;

#[derive(Debug, Default)]
pub struct RunInfo {
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

/// `bins` states: one circular axis. `bins²`: local × target. Otherwise a
/// plain index grid.
pub fn infer_grid(n_states: usize, bins: usize) -> CliResult<StateGrid> {
    if bins >= 2 && n_states == bins {
        Axis::circular(bins).map(StateGrid::one_d).context("state grid")
    } else if bins >= 2 && n_states == bins * bins {
        StateGrid::misalignment_2d(bins).context("state grid")
    } else {
        StateGrid::indexed(n_states).context("state grid")
    }
}

/// A parsed `--passive` value.
#[derive(Debug, Clone, PartialEq)]
pub enum PassiveChoice {
    File(PathBuf),
    Uniform,
    RandomWalk(f64),
    Spp(f64),
}

fn parse_number(flag: &str, value: &str, s: &str) -> CliResult<f64> {
    s.parse::<f64>()
        .map_err(|_| CliError::Usage(format!("{flag} {value:?}: {s:?} is not a number")))
}

impl PassiveChoice {
    pub fn parse(value: &str) -> CliResult<Self> {
        let mut parts = value.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        match (head, rest.as_slice()) {
            ("uniform", []) => Ok(PassiveChoice::Uniform),
            ("rw", [sd]) => Ok(PassiveChoice::RandomWalk(parse_number("--passive", value, sd)?)),
            ("spp", []) => Ok(PassiveChoice::Spp(SppConfig::default().sigma_deg)),
            ("spp", [sigma]) => Ok(PassiveChoice::Spp(parse_number("--passive", value, sigma)?)),
            ("uniform" | "rw" | "spp", _) => Err(CliError::Usage(format!(
                "--passive {value:?}: expected uniform, rw:SD_DEG or spp[:SIGMA_DEG]"
            ))),
            _ => Ok(PassiveChoice::File(PathBuf::from(value))),
        }
    }

    pub fn file(&self) -> Option<&Path> {
        match self {
            PassiveChoice::File(p) => Some(p),
            _ => None,
        }
    }

    pub fn build(&self, grid: &StateGrid) -> CliResult<PassiveDynamics> {
        match self {
            PassiveChoice::File(path) => {
                let m = read_matrix(path)?;
                PassiveDynamics::new(m).map_err(|e| CliError::input(path, e.to_string()))
            }
            PassiveChoice::Uniform => uniform_passive(grid.count()).context("uniform passive dynamics"),
            PassiveChoice::RandomWalk(sd) => random_walk_passive(grid, *sd).context("random-walk passive dynamics"),
            PassiveChoice::Spp(sigma) => {
                let config = SppConfig {
                    sigma_deg: *sigma,
                    ..SppConfig::default()
                };
                spp_passive_dynamics(grid, &config).context("SPP passive dynamics")
            }
        }
    }
}

/// A parsed `--features` value.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureChoice {
    Identity,
    Gaussian {
        spacing: usize,
        bandwidth: f64,
        metric: Metric,
    },
    Bisquare {
        per_dim: Option<Vec<usize>>,
        metric: Metric,
    },
}

impl FeatureChoice {
    pub fn parse(value: &str) -> CliResult<Self> {
        let usage = || {
            CliError::Usage(format!(
                "--features {value:?}: expected identity, gaussian:SPACING:BW_DEG[:planar] or bisquare[:N1,N2,...][:planar]"
            ))
        };
        let mut parts: Vec<&str> = value.split(':').collect();
        let metric = if parts.last() == Some(&"planar") && parts.len() > 1 {
            parts.pop();
            Metric::Planar
        } else {
            Metric::Circular
        };
        match parts.as_slice() {
            ["identity"] if metric == Metric::Circular => Ok(FeatureChoice::Identity),
            ["gaussian", spacing, bw] => Ok(FeatureChoice::Gaussian {
                spacing: spacing.parse().map_err(|_| usage())?,
                bandwidth: parse_number("--features", value, bw)?,
                metric,
            }),
            ["bisquare"] => Ok(FeatureChoice::Bisquare { per_dim: None, metric }),
            ["bisquare", levels] => {
                let per_dim = levels
                    .split(',')
                    .map(|s| s.parse::<usize>().map_err(|_| usage()))
                    .collect::<CliResult<Vec<_>>>()?;
                Ok(FeatureChoice::Bisquare {
                    per_dim: Some(per_dim),
                    metric,
                })
            }
            _ => Err(usage()),
        }
    }

    pub fn build(&self, grid: &StateGrid) -> CliResult<FeatureMatrix> {
        match self {
            FeatureChoice::Identity => identity_features(grid.count()).context("identity features"),
            FeatureChoice::Gaussian {
                spacing,
                bandwidth,
                metric,
            } => gaussian_basis_1d(grid, *spacing, *bandwidth, *metric).context("Gaussian features"),
            FeatureChoice::Bisquare { per_dim, metric } => {
                let levels = match per_dim {
                    None if grid.dims() == 2 => default_bisquare_levels(grid),
                    None => Vec::new(),
                    Some(ns) => {
                        let extent = grid.axis(0).extent();
                        ns.iter().map(|&n| BisquareLevel::with_default_aperture(n, extent)).collect()
                    }
                };
                bisquare_basis_2d(grid, &levels, *metric).context("bisquare features")
            }
        }
    }
}
