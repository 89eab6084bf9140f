//! Minimal row-major dense matrix and a compressed-row view for the hot loops.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "dense matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "dense matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// `selfᵀ * x`.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xi) in self.row_iter().zip(x) {
            if xi != 0.0 {
                for (o, a) in out.iter_mut().zip(r) {
                    *o += a * xi;
                }
            }
        }
        out
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }
}

/// Inner product with four independent accumulators.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `(a ⊗ b) x`, or `(a ⊗ b)ᵀ x` when `transpose`, without forming the
/// product. `x` is read as an `a.cols() × b.cols()` row-major matrix `X`
/// and the result is `a X bᵀ` (respectively `aᵀ X b`).
pub fn kron_mul_vec(a: &DenseMatrix, b: &DenseMatrix, x: &[f64], transpose: bool) -> Vec<f64> {
    let (ra, ca, rb, cb) = if transpose {
        (a.cols, a.rows, b.cols, b.rows)
    } else {
        (a.rows, a.cols, b.rows, b.cols)
    };
    debug_assert_eq!(x.len(), ca * cb);
    // t = X bᵀ (or X b), ca × rb
    let mut t = vec![0.0; ca * rb];
    for k in 0..ca {
        let xr = &x[k * cb..(k + 1) * cb];
        let tr = &mut t[k * rb..(k + 1) * rb];
        if transpose {
            for (l, &xv) in xr.iter().enumerate() {
                if xv != 0.0 {
                    for (tv, bv) in tr.iter_mut().zip(b.row(l)) {
                        *tv += xv * bv;
                    }
                }
            }
        } else {
            for (j, tv) in tr.iter_mut().enumerate() {
                *tv = dot(xr, b.row(j));
            }
        }
    }
    // y = a t (or aᵀ t), ra × rb
    let mut y = vec![0.0; ra * rb];
    for k in 0..ca {
        let tr = &t[k * rb..(k + 1) * rb];
        for i in 0..ra {
            let coef = if transpose { a.get(k, i) } else { a.get(i, k) };
            if coef != 0.0 {
                for (yv, tv) in y[i * rb..(i + 1) * rb].iter_mut().zip(tr) {
                    *yv += coef * tv;
                }
            }
        }
    }
    y
}

/// Compressed sparse rows: for each row, the `(column, value)` pairs with
/// nonzero value.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut offsets = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for r in m.row_iter() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self {
            cols: m.cols(),
            offsets,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (idx, val) = self.row(i);
            for (&j, &a) in idx.iter().zip(val) {
                out[j] += a * xi;
            }
        }
        out
    }
}
