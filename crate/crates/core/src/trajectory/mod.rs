//! Raw positional trajectories to transition counts over the local ×
//! target misalignment grid.
//!
//! Heading at `t` is the direction of the displacement `t → t+1`, so each
//! contiguous run loses its final frame. A stationary step keeps the
//! previous heading, or is dropped if it opens a run. Local misalignment
//! uses every agent of the experiment with a heading at `t`.

mod synthetic;

pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticSurface};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, StateGrid};
use crate::inference::CostToGoSummary;
use crate::lmdp::PassiveDynamics;
use crate::math::{self, normal_cdf};
use crate::matrix::DenseMatrix;
use crate::spp::TransitionCounts;

/// One input row in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub experiment_id: String,
    pub agent_id: String,
    pub t: i64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaBounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Default for ArenaBounds {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 1.0,
            y_max: 1.0,
        }
    }
}

impl ArenaBounds {
    fn rescale(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x_min) / (self.x_max - self.x_min),
            (y - self.y_min) / (self.y_max - self.y_min),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Target point in rescaled units.
    pub target_point: (f64, f64),
    pub arena_bounds: ArenaBounds,
    pub n_bins_per_dim: usize,
    /// Whether an agent's own heading enters its local circular mean.
    pub include_self: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target_point: (0.5, 0.5),
            arena_bounds: ArenaBounds::default(),
            n_bins_per_dim: 36,
            include_self: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.arena_bounds;
        if !(b.x_max > b.x_min && b.y_max > b.y_min) || [b.x_min, b.x_max, b.y_min, b.y_max].iter().any(|v| !v.is_finite()) {
            return Err(Error::param("arena_bounds", "need finite bounds with max > min"));
        }
        let (tx, ty) = self.target_point;
        if !((0.0..=1.0).contains(&tx) && (0.0..=1.0).contains(&ty)) {
            return Err(Error::param("target_point", format!("({tx}, {ty}) lies outside the unit square")));
        }
        if self.n_bins_per_dim < 2 {
            return Err(Error::param("n_bins_per_dim", "need at least 2 bins"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<StateGrid> {
        StateGrid::misalignment_2d(self.n_bins_per_dim)
    }
}

/// Time-ordered positions of one agent, already rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSeries {
    pub experiment_id: String,
    pub agent_id: String,
    pub t: Vec<i64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl AgentSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Validated trajectories ordered by `(experiment_id, agent_id)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectoryTable {
    pub series: Vec<AgentSeries>,
}

impl RawTrajectoryTable {
    pub fn experiments(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.series.iter().map(|s| s.experiment_id.as_str()).collect();
        ids.dedup();
        ids
    }
}

/// Non-fatal findings of ingestion. Row numbers count data rows from 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_read: usize,
    pub series: usize,
    /// Rows whose rescaled position falls outside the unit square.
    pub out_of_bounds_rows: Vec<usize>,
    /// `(experiment, agent, t)` where a time gap starts.
    pub gaps: Vec<(String, String, i64)>,
}

/// Rescales and validates rows, grouping them per agent.
pub fn ingest_rows<I: IntoIterator<Item = RawRow>>(
    rows: I,
    config: &ExperimentConfig,
) -> Result<(RawTrajectoryTable, ValidationReport)> {
    config.validate()?;
    let mut report = ValidationReport::default();
    let mut groups: BTreeMap<(String, String), AgentSeries> = BTreeMap::new();
    let mut first_row: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (k, row) in rows.into_iter().enumerate() {
        let row_no = k + 1;
        report.rows_read += 1;
        if !(row.x.is_finite() && row.y.is_finite()) {
            return Err(Error::Validation {
                row: row_no,
                reason: String::from("non-finite position"),
            });
        }
        let (x, y) = config.arena_bounds.rescale(row.x, row.y);
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            report.out_of_bounds_rows.push(row_no);
        }
        let key = (row.experiment_id, row.agent_id);
        first_row.entry(key.clone()).or_insert(row_no);
        let series = groups.entry(key).or_insert_with_key(|(e, a)| AgentSeries {
            experiment_id: e.clone(),
            agent_id: a.clone(),
            t: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
        });
        if let Some(&last) = series.t.last() {
            if row.t == last || series.t.contains(&row.t) {
                return Err(Error::Validation {
                    row: row_no,
                    reason: format!(
                        "duplicate row for experiment {:?}, agent {:?}, t = {}",
                        series.experiment_id, series.agent_id, row.t
                    ),
                });
            }
            if row.t < last {
                return Err(Error::Validation {
                    row: row_no,
                    reason: format!(
                        "time goes backwards for experiment {:?}, agent {:?}: {} after {}",
                        series.experiment_id, series.agent_id, row.t, last
                    ),
                });
            }
            if row.t != last + 1 {
                report
                    .gaps
                    .push((series.experiment_id.clone(), series.agent_id.clone(), last));
            }
        }
        series.t.push(row.t);
        series.x.push(x);
        series.y.push(y);
    }
    for (key, series) in &groups {
        if series.len() < 2 {
            return Err(Error::Validation {
                row: first_row[key],
                reason: format!(
                    "experiment {:?}, agent {:?} has fewer than 2 time points",
                    series.experiment_id, series.agent_id
                ),
            });
        }
    }
    report.series = groups.len();
    Ok((
        RawTrajectoryTable {
            series: groups.into_values().collect(),
        },
        report,
    ))
}

/// One discretized frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub experiment_id: String,
    pub agent_id: String,
    pub t: i64,
    pub local_deg: f64,
    pub target_deg: f64,
    pub state: usize,
}

/// Consecutive-time state indices of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSequence {
    pub experiment_id: String,
    pub agent_id: String,
    pub start_t: i64,
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedStates {
    pub grid: StateGrid,
    pub records: Vec<StateRecord>,
    pub sequences: Vec<StateSequence>,
}

impl DerivedStates {
    pub fn counts(&self) -> TransitionCounts {
        counts_from_sequences(&self.sequences, self.grid.count())
    }
}

pub fn counts_from_sequences(sequences: &[StateSequence], n_states: usize) -> TransitionCounts {
    let mut counts = TransitionCounts::zeros(n_states);
    for s in sequences {
        for w in s.states.windows(2) {
            counts.increment(w[0], w[1]);
        }
    }
    counts
}

/// Forward-displacement headings, `None` where undefined.
fn headings(series: &AgentSeries) -> Vec<Option<f64>> {
    let n = series.len();
    let mut out = alloc::vec![None; n];
    for k in 0..n.saturating_sub(1) {
        if series.t[k + 1] != series.t[k] + 1 {
            continue;
        }
        let (dx, dy) = (series.x[k + 1] - series.x[k], series.y[k + 1] - series.y[k]);
        out[k] = if dx == 0.0 && dy == 0.0 {
            let continues = k > 0 && series.t[k - 1] + 1 == series.t[k];
            if continues {
                out[k - 1]
            } else {
                None
            }
        } else {
            Some(math::atan2_deg(dy, dx))
        };
    }
    out
}

/// Headings, local and target misalignment per frame, then binning.
pub fn derive_states(table: &RawTrajectoryTable, config: &ExperimentConfig) -> Result<DerivedStates> {
    config.validate()?;
    let grid = config.grid()?;
    let (tx, ty) = config.target_point;
    let mut records = Vec::new();
    let mut sequences = Vec::new();

    let mut start = 0;
    while start < table.series.len() {
        let exp_id = &table.series[start].experiment_id;
        let end = start + table.series[start..].iter().take_while(|s| &s.experiment_id == exp_id).count();
        let group = &table.series[start..end];
        let heads: Vec<Vec<Option<f64>>> = group.iter().map(headings).collect();

        // Σ sin, Σ cos and count of defined headings per time.
        let mut sums: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
        for (series, h) in group.iter().zip(&heads) {
            for (&t, theta) in series.t.iter().zip(h) {
                if let Some(th) = theta {
                    let e = sums.entry(t).or_insert((0.0, 0.0, 0));
                    e.0 += math::sin_deg(*th);
                    e.1 += math::cos_deg(*th);
                    e.2 += 1;
                }
            }
        }

        for (series, h) in group.iter().zip(&heads) {
            let mut current: Option<StateSequence> = None;
            for k in 0..series.len() {
                let t = series.t[k];
                let frame = h[k].and_then(|theta| {
                    let (mut s, mut c, mut n) = sums[&t];
                    if !config.include_self {
                        s -= math::sin_deg(theta);
                        c -= math::cos_deg(theta);
                        n -= 1;
                    }
                    if n == 0 {
                        return None;
                    }
                    let local = math::angle_diff_deg(math::atan2_deg(s, c), theta);
                    let to_target = math::atan2_deg(ty - series.y[k], tx - series.x[k]);
                    let target = math::angle_diff_deg(to_target, theta);
                    Some((local, target))
                });
                let Some((local, target)) = frame else {
                    if let Some(seq) = current.take() {
                        sequences.push(seq);
                    }
                    continue;
                };
                let state = grid
                    .locate(&[local, target])
                    .expect("circular axes bin every finite angle");
                records.push(StateRecord {
                    experiment_id: series.experiment_id.clone(),
                    agent_id: series.agent_id.clone(),
                    t,
                    local_deg: local,
                    target_deg: target,
                    state,
                });
                match current.as_mut() {
                    Some(seq) if seq.start_t + seq.states.len() as i64 == t => seq.states.push(state),
                    _ => {
                        if let Some(seq) = current.take() {
                            sequences.push(seq);
                        }
                        current = Some(StateSequence {
                            experiment_id: series.experiment_id.clone(),
                            agent_id: series.agent_id.clone(),
                            start_t: t,
                            states: alloc::vec![state],
                        });
                    }
                }
            }
            if let Some(seq) = current.take() {
                sequences.push(seq);
            }
        }
        start = end;
    }
    Ok(DerivedStates {
        grid,
        records,
        sequences,
    })
}

/// Every entry `1/J`.
pub fn uniform_passive(n_states: usize) -> Result<PassiveDynamics> {
    if n_states == 0 {
        return Err(Error::param("n_states", "must be positive"));
    }
    let p = 1.0 / n_states as f64;
    PassiveDynamics::new(DenseMatrix::from_row_major(
        n_states,
        n_states,
        alloc::vec![p; n_states * n_states],
    )?)
}

/// Wrapped-normal bin masses from `axis.center(a)` to each bin, folding
/// aliases `Δ + 360k` for `|k| ≤ 2`.
fn random_walk_kernel(axis: &Axis, sd: f64) -> DenseMatrix {
    let n = axis.count();
    let hw = axis.half_width();
    let period = axis.extent();
    let mut k = DenseMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let d = axis.signed_diff(axis.center(b), axis.center(a));
            let mass: f64 = (-2..=2)
                .map(|w| {
                    let dw = d + period * w as f64;
                    normal_cdf((dw + hw) / sd) - normal_cdf((dw - hw) / sd)
                })
                .sum();
            k.set(a, b, mass);
        }
    }
    k
}

/// Independent normal random walks per circular dimension, product over
/// dimensions, rows normalized.
pub fn random_walk_passive(grid: &StateGrid, sd_deg: f64) -> Result<PassiveDynamics> {
    if !(sd_deg > 0.0 && sd_deg.is_finite()) {
        return Err(Error::param("sd_deg", format!("must be positive, got {sd_deg}")));
    }
    if grid.axes().iter().any(|a| !a.is_circular()) {
        return Err(Error::param("grid", "random-walk passive dynamics need circular axes"));
    }
    let kernels = grid
        .axes()
        .iter()
        .map(|a| PassiveDynamics::from_weights(random_walk_kernel(a, sd_deg)))
        .collect::<Result<Vec<_>>>()?;
    Ok(match kernels.as_slice() {
        [k] => k.clone(),
        [k0, k1] => PassiveDynamics::kronecker(k0, k1),
        _ => unreachable!("grids have one or two axes"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Local,
    Target,
}

impl Dimension {
    fn index(self) -> usize {
        match self {
            Dimension::Local => 0,
            Dimension::Target => 1,
        }
    }
}

/// Mean of `values` over the other dimension, shifted to minimum 0.
pub fn marginal_mean(values: &[f64], grid: &StateGrid, dimension: Dimension) -> Result<Vec<f64>> {
    if grid.dims() != 2 {
        return Err(Error::param("grid", "marginals need a 2-D grid"));
    }
    if values.len() != grid.count() {
        return Err(Error::DimensionMismatch {
            context: "surface vs grid",
            expected: grid.count(),
            found: values.len(),
        });
    }
    let d = dimension.index();
    let n = grid.axis(d).count();
    let other = grid.axis(1 - d).count() as f64;
    let mut sums = alloc::vec![0.0; n];
    for (s, v) in values.iter().enumerate() {
        let (a, b) = grid.unravel(s);
        sums[if d == 0 { a } else { b }] += v;
    }
    let means: Vec<f64> = sums.iter().map(|s| s / other).collect();
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(means.iter().map(|m| m - min).collect())
}

pub fn marginal_ctg(summary: &CostToGoSummary, grid: &StateGrid, dimension: Dimension) -> Result<Vec<f64>> {
    marginal_mean(&summary.mean, grid, dimension)
}
