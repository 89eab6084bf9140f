//! Discretized state spaces: 1-D axes (circular or linear) and their products.
//!
//! Centers are in degrees for angular axes. A product grid is indexed
//! row-major with the first axis major: `state = a * n_b + b`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    count: usize,
    first_center: f64,
    half_width: f64,
    circular: bool,
}

impl Axis {
    /// Circular axis of `count` equal bins spanning one 360° period, with
    /// centers `-180 + w, -180 + 2w, ..., 180` for bin width `w = 360 / count`.
    /// The last bin is the wrap-around bin centered on ±180°.
    pub fn circular(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("count", "a grid needs at least one bin"));
        }
        let width = 360.0 / count as f64;
        Ok(Self {
            count,
            first_center: -180.0 + width,
            half_width: width / 2.0,
            circular: true,
        })
    }

    /// Non-wrapping axis of `count` bins of width `2 * half_width`.
    pub fn linear(count: usize, first_center: f64, half_width: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("count", "a grid needs at least one bin"));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::param("half_width", format!("must be positive, got {half_width}")));
        }
        Ok(Self {
            count,
            first_center,
            half_width,
            circular: false,
        })
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    #[inline]
    pub fn is_circular(&self) -> bool {
        self.circular
    }

    /// Length of the covered domain (one period for circular axes).
    pub fn extent(&self) -> f64 {
        self.count as f64 * self.width()
    }

    /// Lower edge of the first bin.
    pub fn lower_edge(&self) -> f64 {
        self.first_center - self.half_width
    }

    #[inline]
    pub fn center(&self, bin: usize) -> f64 {
        let c = self.first_center + bin as f64 * self.width();
        if self.circular {
            math::wrap_deg(c)
        } else {
            c
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.center(k)).collect()
    }

    /// Bin containing `value`; bins are `(center - hw, center + hw]`.
    /// Circular axes always return a bin; linear axes return `None` outside
    /// the covered range.
    pub fn bin(&self, value: f64) -> Option<usize> {
        if !value.is_finite() {
            return None;
        }
        let k = math::ceil((value - self.first_center) / self.width() - 0.5);
        if self.circular {
            let n = self.count as f64;
            let k = k - n * math::floor(k / n);
            Some((k as usize).min(self.count - 1))
        } else if k < 0.0 || k >= self.count as f64 {
            // the lower edge itself is excluded, matching the half-open bins
            None
        } else {
            Some(k as usize)
        }
    }

    /// Signed difference `a - b`, wrapped to (-180, 180] on circular axes.
    #[inline]
    pub fn signed_diff(&self, a: f64, b: f64) -> f64 {
        if self.circular {
            math::angle_diff_deg(a, b)
        } else {
            a - b
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    axes: Vec<Axis>,
}

impl StateGrid {
    pub fn one_d(axis: Axis) -> Self {
        Self { axes: vec![axis] }
    }

    pub fn product(first: Axis, second: Axis) -> Self {
        Self {
            axes: vec![first, second],
        }
    }

    /// The 36-bin local-misalignment grid: centers -170°, ..., 170°, ±180°.
    pub fn misalignment() -> Self {
        Self::one_d(Axis::circular(36).expect("nonzero"))
    }

    /// Local misalignment × target misalignment, `n_bins` per dimension.
    pub fn misalignment_2d(n_bins: usize) -> Result<Self> {
        Ok(Self::product(Axis::circular(n_bins)?, Axis::circular(n_bins)?))
    }

    /// Plain integer-labelled grid, for problems without geometry.
    pub fn indexed(count: usize) -> Result<Self> {
        Ok(Self::one_d(Axis::linear(count, 0.0, 0.5)?))
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, dim: usize) -> &Axis {
        &self.axes[dim]
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn count(&self) -> usize {
        self.axes.iter().map(Axis::count).product()
    }

    /// Per-axis bins of a state.
    pub fn unravel(&self, state: usize) -> (usize, usize) {
        match self.axes.as_slice() {
            [_] => (state, 0),
            [_, b] => (state / b.count(), state % b.count()),
            _ => unreachable!("grids have one or two axes"),
        }
    }

    pub fn ravel(&self, first: usize, second: usize) -> usize {
        match self.axes.as_slice() {
            [_] => first,
            [_, b] => first * b.count() + second,
            _ => unreachable!("grids have one or two axes"),
        }
    }

    /// Center of `state` along `dim`.
    pub fn center(&self, state: usize, dim: usize) -> f64 {
        let (a, b) = self.unravel(state);
        self.axes[dim].center(if dim == 0 { a } else { b })
    }

    /// State containing the given coordinates (one per axis).
    pub fn locate(&self, coords: &[f64]) -> Option<usize> {
        match (self.axes.as_slice(), coords) {
            ([a], [x]) => a.bin(*x),
            ([a, b], [x, y]) => Some(self.ravel(a.bin(*x)?, b.bin(*y)?)),
            _ => None,
        }
    }
}
