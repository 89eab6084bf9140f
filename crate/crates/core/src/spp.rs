//! Vicsek self-propelled particles embedded as an LMDP over local
//! misalignment, and a synchronous multi-agent simulator driven by a
//! controlled policy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StateGrid;
use crate::lmdp::{ControlledPolicy, CostVector, PassiveDynamics};
use crate::math::{self, normal_cdf};
use crate::matrix::DenseMatrix;
use crate::rng;

/// Which state is recorded for agent `n` at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StateRecording {
    /// The bin of the misalignment re-derived from the new geometry.
    Realized,
    /// The target state drawn from the policy.
    #[default]
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SppConfig {
    pub n_agents: usize,
    pub n_steps: usize,
    /// Distance per step.
    pub speed: f64,
    /// Interaction radius, same units as positions.
    pub radius_rho: f64,
    /// Turning-angle noise, degrees.
    pub sigma_deg: f64,
    /// Discrete turning angles of the underlying MDP, degrees.
    pub turning_angles: Vec<f64>,
    pub seed: u64,
    pub recording: StateRecording,
}

impl Default for SppConfig {
    fn default() -> Self {
        Self {
            n_agents: 200,
            n_steps: 100,
            speed: 1.0,
            radius_rho: 0.1,
            sigma_deg: 10.0,
            turning_angles: (-6..=6).map(|k| 10.0 * k as f64).collect(),
            seed: 0,
            recording: StateRecording::default(),
        }
    }
}

impl SppConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::param("n_agents", "must be positive"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be positive"));
        }
        for (name, value) in [
            ("speed", self.speed),
            ("radius_rho", self.radius_rho),
            ("sigma_deg", self.sigma_deg),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        let a = &self.turning_angles;
        if a.is_empty() {
            return Err(Error::param("turning_angles", "empty"));
        }
        if a.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("turning_angles", "must be strictly increasing"));
        }
        if a.iter().zip(a.iter().rev()).any(|(x, y)| math::abs(x + y) > 1e-9) {
            return Err(Error::param("turning_angles", "must be symmetric about 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    /// Heading in degrees, (-180, 180].
    pub theta: f64,
}

/// A sequence of `(t, state)` pairs with `t` consecutive from the first entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub agent_id: usize,
    pub states: Vec<(usize, usize)>,
}

/// Observed transition frequencies `y_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    n: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    /// Builds a table from `(from, to, count)` triplets; repeated pairs add up.
    pub fn from_entries<I: IntoIterator<Item = (usize, usize, u64)>>(n: usize, entries: I) -> Result<Self> {
        let mut t = Self::zeros(n);
        for (i, j, c) in entries {
            for s in [i, j] {
                if s >= n {
                    return Err(Error::StateOutOfRange { state: s, count: n });
                }
            }
            t.counts[i * n + j] += c;
        }
        Ok(t)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n + j]
    }

    #[inline]
    pub fn increment(&mut self, i: usize, j: usize) {
        self.counts[i * self.n + j] += 1;
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.n..(i + 1) * self.n]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Incoming transitions per destination state.
    pub fn column_totals(&self) -> Vec<u64> {
        let mut out = vec![0; self.n];
        for i in 0..self.n {
            for (o, &c) in out.iter_mut().zip(self.row(i)) {
                *o += c;
            }
        }
        out
    }

    /// Nonzero `(from, to, count)` triplets in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(k, &c)| (k / self.n, k % self.n, c))
    }

    pub fn nonzero_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn density(&self) -> f64 {
        self.nonzero_count() as f64 / self.counts.len().max(1) as f64
    }

    pub fn merge(&mut self, other: &TransitionCounts) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                context: "transition counts",
                expected: self.n,
                found: other.n,
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// `y_ij = Σ_n Σ_t 1{s_nt = j, s_n(t-1) = i}`.
pub fn count_transitions(trajectories: &[Trajectory], n_states: usize) -> Result<TransitionCounts> {
    let mut counts = TransitionCounts::zeros(n_states);
    for (k, traj) in trajectories.iter().enumerate() {
        for (pos, w) in traj.states.windows(2).enumerate() {
            let ((t0, i), (t1, j)) = (w[0], w[1]);
            if t1 != t0 + 1 {
                return Err(Error::NonConsecutiveTime {
                    trajectory: k,
                    position: pos + 1,
                    t: t1,
                });
            }
            for s in [i, j] {
                if s >= n_states {
                    return Err(Error::StateOutOfRange {
                        state: s,
                        count: n_states,
                    });
                }
            }
            counts.increment(i, j);
        }
        if let Some(&(_, s)) = traj.states.first() {
            if s >= n_states {
                return Err(Error::StateOutOfRange {
                    state: s,
                    count: n_states,
                });
            }
        }
    }
    Ok(counts)
}

/// Circular mean heading of the agent and every other agent within `rho`
/// (inclusive), minus the agent's heading. `others` must not contain the
/// agent itself.
pub fn local_misalignment(agent: &AgentState, others: &[AgentState], rho: f64) -> f64 {
    let rho2 = rho * rho;
    let (mut s, mut c) = (math::sin_deg(agent.theta), math::cos_deg(agent.theta));
    for o in others {
        let (dx, dy) = (o.x - agent.x, o.y - agent.y);
        if dx * dx + dy * dy <= rho2 {
            s += math::sin_deg(o.theta);
            c += math::cos_deg(o.theta);
        }
    }
    math::angle_diff_deg(math::atan2_deg(s, c), agent.theta)
}

/// Staircase costs over misalignment bin centers: 0 within 5°, 2.5 within
/// 15°, 4 within 25°, 5 otherwise.
pub fn spp_state_costs(grid: &StateGrid) -> CostVector {
    let axis = grid.axis(0);
    let values = (0..grid.count())
        .map(|i| {
            let s = math::abs(axis.center(i));
            if s <= 5.0 {
                0.0
            } else if s <= 15.0 {
                2.5
            } else if s <= 25.0 {
                4.0
            } else {
                5.0
            }
        })
        .collect();
    CostVector::new(values).expect("staircase costs are finite")
}

/// Passive dynamics as the discretized mixture over turning angles of
/// normals with standard deviation `sigma_deg`, one bin wide, then
/// row-normalized.
pub fn spp_passive_dynamics(grid: &StateGrid, config: &SppConfig) -> Result<PassiveDynamics> {
    config.validate()?;
    if grid.dims() != 1 || !grid.axis(0).is_circular() {
        return Err(Error::param("grid", "SPP passive dynamics need a 1-D circular grid"));
    }
    let axis = grid.axis(0);
    let n = axis.count();
    let hw = axis.half_width();
    let sigma = config.sigma_deg;
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = axis.signed_diff(axis.center(j), axis.center(i));
            let mass: f64 = config
                .turning_angles
                .iter()
                .map(|&phi| normal_cdf((d - phi + hw) / sigma) - normal_cdf((d - phi - hw) / sigma))
                .sum();
            w.set(i, j, mass);
        }
    }
    PassiveDynamics::from_weights(w)
}

/// Everything produced by [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    /// Recorded (binned) states per agent.
    pub trajectories: Vec<Trajectory>,
    /// Counts over the recorded trajectories.
    pub counts: TransitionCounts,
    /// Agent states for `t = 0..=n_steps`, indexed `[agent][t]`.
    pub paths: Vec<Vec<AgentState>>,
    /// Continuous local misalignment, `[agent][t]`, degrees.
    pub misalignment: Vec<Vec<f64>>,
}

const INIT_STREAM: u64 = u64::MAX;

/// Runs the synchronous SPP under `policy`.
///
/// Step 1 places agents uniformly on the unit square with uniform headings
/// and bins their misalignment. Each later step, every agent (reading only
/// the previous snapshot) draws a target misalignment state from its policy
/// row, turns by the angle that would move its current misalignment onto the
/// target's bin center, moves one step along its old heading, and adopts the
/// new heading. Misalignment is then recomputed from the new configuration.
pub fn simulate(config: &SppConfig, policy: &ControlledPolicy, grid: &StateGrid) -> Result<SimulationOutput> {
    config.validate()?;
    if policy.len() != grid.count() {
        return Err(Error::DimensionMismatch {
            context: "policy vs grid",
            expected: grid.count(),
            found: policy.len(),
        });
    }
    if grid.dims() != 1 {
        return Err(Error::param("grid", "the SPP simulator needs a 1-D misalignment grid"));
    }
    let axis = grid.axis(0);
    let n = config.n_agents;

    let mut agents: Vec<AgentState> = (0..n)
        .map(|a| {
            let mut r = rng::stream(config.seed, a as u64, INIT_STREAM);
            let x = rng::uniform(&mut r);
            let y = rng::uniform(&mut r);
            // (-180, 180]
            let theta = 180.0 - 360.0 * rng::uniform(&mut r);
            AgentState { x, y, theta }
        })
        .collect();

    let mut mis = misalignments(&agents, config.radius_rho);
    let mut states: Vec<usize> = mis.iter().map(|&m| bin(axis, m)).collect();

    let mut paths: Vec<Vec<AgentState>> = agents.iter().map(|a| vec![*a]).collect();
    let mut mis_paths: Vec<Vec<f64>> = mis.iter().map(|&m| vec![m]).collect();
    let mut trajectories: Vec<Trajectory> = states
        .iter()
        .enumerate()
        .map(|(a, &s)| Trajectory {
            agent_id: a,
            states: vec![(0, s)],
        })
        .collect();
    let mut counts = TransitionCounts::zeros(grid.count());
    let mut targets = vec![0usize; n];

    for t in 1..=config.n_steps {
        let next: Vec<AgentState> = agents
            .iter()
            .enumerate()
            .map(|(a, prev)| {
                let mut r = rng::stream(config.seed, a as u64, t as u64);
                let target = rng::categorical(&mut r, policy.row(states[a]));
                targets[a] = target;
                let turn = math::angle_diff_deg(mis[a], axis.center(target));
                AgentState {
                    x: prev.x + config.speed * math::cos_deg(prev.theta),
                    y: prev.y + config.speed * math::sin_deg(prev.theta),
                    theta: math::wrap_deg(prev.theta + turn),
                }
            })
            .collect();
        agents = next;
        mis = misalignments(&agents, config.radius_rho);
        for a in 0..n {
            let realized = bin(axis, mis[a]);
            let recorded = match config.recording {
                StateRecording::Realized => realized,
                StateRecording::Sampled => targets[a],
            };
            counts.increment(states[a], recorded);
            states[a] = recorded;
            trajectories[a].states.push((t, recorded));
            paths[a].push(agents[a]);
            mis_paths[a].push(mis[a]);
        }
    }

    Ok(SimulationOutput {
        trajectories,
        counts,
        paths,
        misalignment: mis_paths,
    })
}

fn bin(axis: &crate::grid::Axis, value: f64) -> usize {
    axis.bin(value).expect("circular axes bin every finite angle")
}

fn misalignments(agents: &[AgentState], rho: f64) -> Vec<f64> {
    let mut others: Vec<AgentState> = Vec::with_capacity(agents.len());
    (0..agents.len())
        .map(|a| {
            others.clear();
            others.extend(agents.iter().enumerate().filter(|(b, _)| *b != a).map(|(_, s)| *s));
            local_misalignment(&agents[a], &others, rho)
        })
        .collect()
}
