use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PosteriorSample;
use crate::basis::FeatureMatrix;
use crate::error::{Error, Result};

/// Per-state posterior summary of the cost-to-go, shifted so that the
/// posterior mean has minimum 0. The same shift is applied to the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostToGoSummary {
    pub mean: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
    pub shift: f64,
}

impl CostToGoSummary {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn width(&self, state: usize) -> f64 {
        self.upper95[state] - self.lower95[state]
    }
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(sample: &PosteriorSample, features: &FeatureMatrix) -> Result<CostToGoSummary> {
    if sample.draws.is_empty() {
        return Err(Error::param("sample", "contains no draws"));
    }
    let n = features.n_states();
    let mut per_state: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(sample.draws.len())).collect();
    for draw in &sample.draws {
        if draw.beta.len() != features.n_basis() {
            return Err(Error::DimensionMismatch {
                context: "draw length vs basis size",
                expected: features.n_basis(),
                found: draw.beta.len(),
            });
        }
        for (s, v) in per_state.iter_mut().zip(features.apply(&draw.beta)) {
            s.push(v);
        }
    }
    let k = sample.draws.len() as f64;
    let raw_mean: Vec<f64> = per_state.iter().map(|s| s.iter().sum::<f64>() / k).collect();
    let shift = raw_mean.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lower95 = Vec::with_capacity(n);
    let mut upper95 = Vec::with_capacity(n);
    for s in &mut per_state {
        s.sort_by(f64::total_cmp);
        lower95.push(quantile_sorted(s, 0.025) - shift);
        upper95.push(quantile_sorted(s, 0.975) - shift);
    }
    Ok(CostToGoSummary {
        mean: raw_mean.iter().map(|m| m - shift).collect(),
        lower95,
        upper95,
        shift,
    })
}
