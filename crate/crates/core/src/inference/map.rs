//! Posterior mode by limited-memory BFGS.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::LogDensity;
use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub max_iter: usize,
    pub history: usize,
    /// Stop when the gradient's max-norm falls below this.
    pub grad_tol: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            history: 10,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub x: Vec<f64>,
    pub log_density: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn find_map<T: LogDensity>(target: &T, init: &[f64], config: &MapConfig) -> Result<MapResult> {
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "initial point",
            expected: dim,
            found: init.len(),
        });
    }
    // minimize f = -log p
    let eval = |x: &[f64], g: &mut Vec<f64>| {
        let lp = target.log_density_grad(x, g);
        for gi in g.iter_mut() {
            *gi = -*gi;
        }
        -lp
    };
    let mut x = init.to_vec();
    let mut g = vec![0.0; dim];
    let mut f = eval(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history);
    let mut g_new = vec![0.0; dim];
    for iteration in 0..config.max_iter {
        if max_abs(&g) < config.grad_tol {
            return Ok(MapResult {
                x,
                log_density: -f,
                iterations: iteration,
                grad_norm: max_abs(&g),
            });
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        let scale = memory.back().map_or(1.0 / max_abs(&g).max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        for di in d.iter_mut() {
            *di *= scale;
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        // backtracking Armijo line search
        let mut step = 1.0;
        let mut x_new = vec![0.0; dim];
        let mut f_new;
        loop {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                *xn = xi + step * di;
            }
            f_new = eval(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Ok(MapResult {
                    grad_norm: max_abs(&g),
                    x,
                    log_density: -f,
                    iterations: iteration,
                });
            }
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * sqrt(dot(&s, &s) * dot(&y, &y)) {
            if memory.len() == config.history {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        core::mem::swap(&mut g, &mut g_new);
    }
    Err(Error::NonConvergence {
        iterations: config.max_iter,
        change: max_abs(&g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl LogDensity for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }

        fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
            grad[0] = -(-2.0 * (1.0 - a) - 400.0 * a * (b - a * a));
            grad[1] = -(200.0 * (b - a * a));
            -f
        }
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let r = find_map(&Rosenbrock, &[-1.2, 1.0], &MapConfig::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }
}
