//! Feature matrices `X` (J × n_b) with `v = X β`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, StateGrid};
use crate::math::{self, exp};
use crate::matrix::{DenseMatrix, SparseRows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Identity,
    Gaussian1d,
    Bisquare2d,
}

/// How distances between states and basis centers are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Wrap-aware on circular axes.
    #[default]
    Circular,
    /// Plain differences, ignoring circularity.
    Planar,
}

/// One basis function: its center (one coordinate per grid axis) and its
/// bandwidth or aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFunction {
    pub center: Vec<f64>,
    pub scale: f64,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMetadata {
    pub kind: FeatureKind,
    pub metric: Metric,
    pub functions: Vec<BasisFunction>,
}

#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: DenseMatrix,
    sparse: SparseRows,
    metadata: BasisMetadata,
}

impl FeatureMatrix {
    fn build(values: DenseMatrix, metadata: BasisMetadata) -> Result<Self> {
        let sparse = SparseRows::from_dense(&values);
        let mut touched = vec![false; values.cols()];
        for i in 0..sparse.rows() {
            for &k in sparse.row(i).0 {
                touched[k] = true;
            }
        }
        if let Some(column) = touched.iter().position(|t| !t) {
            return Err(Error::EmptyBasisColumn { column });
        }
        Ok(Self {
            values,
            sparse,
            metadata,
        })
    }

    /// Wraps an arbitrary dense matrix (treated as identity-kind metadata-free
    /// features).
    pub fn from_dense(values: DenseMatrix, kind: FeatureKind) -> Result<Self> {
        let metadata = BasisMetadata {
            kind,
            metric: Metric::Circular,
            functions: Vec::new(),
        };
        Self::build(values, metadata)
    }

    pub fn n_states(&self) -> usize {
        self.values.rows()
    }

    pub fn n_basis(&self) -> usize {
        self.values.cols()
    }

    pub fn kind(&self) -> FeatureKind {
        self.metadata.kind
    }

    pub fn metadata(&self) -> &BasisMetadata {
        &self.metadata
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    /// `v = X β`.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        self.sparse.mul_vec(beta)
    }

    /// `Xᵀ g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        self.sparse.mul_vec_transposed(g)
    }

    /// States with no positive basis value; their cost-to-go is pinned to 0.
    pub fn uncovered_states(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&i| !self.sparse.row(i).1.iter().any(|&x| x > 0.0))
            .collect()
    }

    pub fn nonzero_fraction(&self) -> f64 {
        self.values.nonzero_count() as f64 / (self.n_states() * self.n_basis()).max(1) as f64
    }
}

pub fn identity_features(n_states: usize) -> Result<FeatureMatrix> {
    if n_states == 0 {
        return Err(Error::param("n_states", "must be at least 1"));
    }
    let metadata = BasisMetadata {
        kind: FeatureKind::Identity,
        metric: Metric::Circular,
        functions: Vec::new(),
    };
    FeatureMatrix::build(DenseMatrix::identity(n_states), metadata)
}

fn axis_distance(axis: &Axis, a: f64, b: f64, metric: Metric) -> f64 {
    match metric {
        Metric::Circular => math::abs(axis.signed_diff(a, b)),
        Metric::Planar => math::abs(a - b),
    }
}

/// Gaussian bumps centered on every `spacing`-th cell of a 1-D grid,
/// `X_ik = exp(-d(s_i, c_k)² / (2 bandwidth²))`.
pub fn gaussian_basis_1d(
    grid: &StateGrid,
    spacing: usize,
    bandwidth: f64,
    metric: Metric,
) -> Result<FeatureMatrix> {
    if grid.dims() != 1 {
        return Err(Error::param("grid", "Gaussian bases need a 1-D grid"));
    }
    if spacing == 0 {
        return Err(Error::param("spacing", "must be at least 1"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::param("bandwidth", format!("must be positive, got {bandwidth}")));
    }
    let axis = grid.axis(0);
    let n = axis.count();
    let centers: Vec<f64> = (0..n).step_by(spacing).map(|k| axis.center(k)).collect();
    let mut x = DenseMatrix::zeros(n, centers.len());
    for i in 0..n {
        let s = axis.center(i);
        for (k, &c) in centers.iter().enumerate() {
            let d = axis_distance(axis, s, c, metric);
            x.set(i, k, exp(-d * d / (2.0 * bandwidth * bandwidth)));
        }
    }
    let functions = centers
        .into_iter()
        .map(|c| BasisFunction {
            center: vec![c],
            scale: bandwidth,
            level: 0,
        })
        .collect();
    FeatureMatrix::build(
        x,
        BasisMetadata {
            kind: FeatureKind::Gaussian1d,
            metric,
            functions,
        },
    )
}

/// One resolution of a bisquare basis: an `per_dim × per_dim` lattice of
/// centers with a common aperture (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisquareLevel {
    pub per_dim: usize,
    pub aperture: f64,
}

impl BisquareLevel {
    /// Aperture 1.5× the lattice spacing over a domain of length `extent`.
    pub fn with_default_aperture(per_dim: usize, extent: f64) -> Self {
        Self {
            per_dim,
            aperture: 1.5 * extent / per_dim as f64,
        }
    }
}

/// Three resolutions, 7² + 15² + 24² = 850 functions on a 360° × 360° grid.
pub fn default_bisquare_levels(grid: &StateGrid) -> Vec<BisquareLevel> {
    let extent = grid.axis(0).extent();
    [7, 15, 24]
        .into_iter()
        .map(|n| BisquareLevel::with_default_aperture(n, extent))
        .collect()
}

/// Multiresolution bisquare basis on a 2-D product grid:
/// `X_ik = (1 - (d_ik / aperture)²)²` for `d_ik < aperture`, else 0.
pub fn bisquare_basis_2d(grid: &StateGrid, levels: &[BisquareLevel], metric: Metric) -> Result<FeatureMatrix> {
    if grid.dims() != 2 {
        return Err(Error::param("grid", "bisquare bases need a 2-D product grid"));
    }
    if levels.is_empty() {
        return Err(Error::param("levels", "need at least one resolution"));
    }
    for l in levels {
        if l.per_dim == 0 {
            return Err(Error::param("levels", "a level needs at least one center per dimension"));
        }
        if !(l.aperture > 0.0) || !l.aperture.is_finite() {
            return Err(Error::param("levels", format!("aperture must be positive, got {}", l.aperture)));
        }
    }
    let (ax, ay) = (grid.axis(0), grid.axis(1));
    let lattice = |axis: &Axis, n: usize| -> Vec<f64> {
        let step = axis.extent() / n as f64;
        (0..n).map(|k| axis.lower_edge() + step * (k as f64 + 0.5)).collect()
    };
    let mut functions = Vec::new();
    for (level, l) in levels.iter().enumerate() {
        let (cx, cy) = (lattice(ax, l.per_dim), lattice(ay, l.per_dim));
        for &a in &cx {
            for &b in &cy {
                functions.push(BasisFunction {
                    center: vec![a, b],
                    scale: l.aperture,
                    level,
                });
            }
        }
    }
    let n = grid.count();
    let mut x = DenseMatrix::zeros(n, functions.len());
    for i in 0..n {
        let (si, sj) = (grid.center(i, 0), grid.center(i, 1));
        for (k, f) in functions.iter().enumerate() {
            let dx = axis_distance(ax, si, f.center[0], metric);
            let dy = axis_distance(ay, sj, f.center[1], metric);
            let d = math::sqrt(dx * dx + dy * dy);
            if d < f.scale {
                let u = d / f.scale;
                let w = 1.0 - u * u;
                x.set(i, k, w * w);
            }
        }
    }
    FeatureMatrix::build(
        x,
        BasisMetadata {
            kind: FeatureKind::Bisquare2d,
            metric,
            functions,
        },
    )
}
