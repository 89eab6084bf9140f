//! Synthetic multi-experiment trajectories with a known preference for
//! local alignment and for heading towards the target.
//!
//! Each step an agent picks a turning angle `φ` with probability
//! proportional to `N(φ; 0, σ) · exp(−v(l − φ, g − φ))`, where `(l, g)` is
//! its current local and target misalignment, then moves a fixed distance.
//! Headings reflect off the walls of the unit square.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::RawRow;
use crate::error::{Error, Result};
use crate::math::{self, cos_deg, exp, sin_deg};
use crate::rng::{self, categorical, standard_normal, uniform};

const SYNTHETIC_STREAM: u64 = 0x6775_7070;

/// `v(l, g) = local_weight (1 − cos l) + target_weight (1 − cos g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSurface {
    pub local_weight: f64,
    pub target_weight: f64,
}

impl Default for SyntheticSurface {
    fn default() -> Self {
        Self {
            local_weight: 1.5,
            target_weight: 0.5,
        }
    }
}

impl SyntheticSurface {
    pub fn value(&self, local_deg: f64, target_deg: f64) -> f64 {
        self.local_weight * (1.0 - cos_deg(local_deg)) + self.target_weight * (1.0 - cos_deg(target_deg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_experiments: usize,
    pub n_agents: usize,
    /// Moves per agent; each agent yields `n_steps + 1` rows.
    pub n_steps: usize,
    /// Distance per step in unit-square units.
    pub speed: f64,
    pub turning_angles: Vec<f64>,
    pub turn_sd_deg: f64,
    /// Extra heading noise after the chosen turn.
    pub heading_noise_deg: f64,
    pub target_point: (f64, f64),
    /// Side of the square arena in output pixel units.
    pub arena_px: f64,
    pub surface: SyntheticSurface,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_experiments: 26,
            n_agents: 10,
            n_steps: 100,
            speed: 0.01,
            turning_angles: (-6..=6).map(|k| 10.0 * k as f64).collect(),
            turn_sd_deg: 30.0,
            heading_noise_deg: 5.0,
            target_point: (0.8, 0.5),
            arena_px: 1000.0,
            surface: SyntheticSurface::default(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_experiments == 0 || self.n_agents == 0 || self.n_steps == 0 {
            return Err(Error::param("synthetic", "experiment, agent and step counts must be positive"));
        }
        for (name, v) in [
            ("speed", self.speed),
            ("turn_sd_deg", self.turn_sd_deg),
            ("arena_px", self.arena_px),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.heading_noise_deg >= 0.0) || self.turning_angles.is_empty() {
            return Err(Error::param("synthetic", "need nonnegative noise and at least one turning angle"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Agent {
    x: f64,
    y: f64,
    theta: f64,
}

fn reflect(a: &mut Agent, speed: f64) {
    let nx = a.x + speed * cos_deg(a.theta);
    if !(0.0..=1.0).contains(&nx) {
        a.theta = math::wrap_deg(180.0 - a.theta);
    }
    let ny = a.y + speed * sin_deg(a.theta);
    if !(0.0..=1.0).contains(&ny) {
        a.theta = math::wrap_deg(-a.theta);
    }
}

/// Rows in pixel coordinates, experiments `exp01..` and agents `a00..`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<RawRow>> {
    config.validate()?;
    let (tx, ty) = config.target_point;
    let mut rows = Vec::with_capacity(config.n_experiments * config.n_agents * (config.n_steps + 1));
    for e in 0..config.n_experiments {
        let mut r = rng::stream(config.seed, e as u64, SYNTHETIC_STREAM);
        let mut agents: Vec<Agent> = (0..config.n_agents)
            .map(|_| Agent {
                x: 0.1 + 0.8 * uniform(&mut r),
                y: 0.1 + 0.8 * uniform(&mut r),
                theta: 180.0 - 360.0 * uniform(&mut r),
            })
            .collect();
        let mut frames: Vec<Vec<(f64, f64)>> = Vec::with_capacity(config.n_steps + 1);
        frames.push(agents.iter().map(|a| (a.x, a.y)).collect());
        let mut weights = alloc::vec![0.0; config.turning_angles.len()];
        for _ in 0..config.n_steps {
            for a in agents.iter_mut() {
                reflect(a, config.speed);
                a.x += config.speed * cos_deg(a.theta);
                a.y += config.speed * sin_deg(a.theta);
            }
            frames.push(agents.iter().map(|a| (a.x, a.y)).collect());
            let mean_heading = math::circular_mean_deg(agents.iter().map(|a| a.theta));
            for a in agents.iter_mut() {
                let local = math::angle_diff_deg(mean_heading, a.theta);
                let target = math::angle_diff_deg(math::atan2_deg(ty - a.y, tx - a.x), a.theta);
                for (w, &phi) in weights.iter_mut().zip(&config.turning_angles) {
                    let z = phi / config.turn_sd_deg;
                    let next = config.surface.value(local - phi, target - phi);
                    *w = exp(-0.5 * z * z - next);
                }
                let phi = config.turning_angles[categorical(&mut r, &weights)];
                let noise = config.heading_noise_deg * standard_normal(&mut r);
                a.theta = math::wrap_deg(a.theta + phi + noise);
            }
        }
        for n in 0..config.n_agents {
            for (t, frame) in frames.iter().enumerate() {
                let (x, y) = frame[n];
                rows.push(RawRow {
                    experiment_id: format!("exp{:02}", e + 1),
                    agent_id: format!("a{n:02}"),
                    t: t as i64,
                    x: x * config.arena_px,
                    y: y * config.arena_px,
                });
            }
        }
    }
    Ok(rows)
}
