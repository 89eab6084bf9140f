//! The discrete LMDP `(S, P̄, γ, R)`: optimal policies, control costs,
//! Z-iteration and recovery of state costs from costs-to-go.
//!
//! Costs-to-go are stored as `v`; the desirability `z = exp(-v)` is only
//! materialized on request. Every sum of exponentials over `v` is centred on
//! its maximum term.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::StateGrid;
use crate::math::{self, exp, ln};
use crate::matrix::DenseMatrix;

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic passive (uncontrolled) transition table `P̄`.
///
/// Tables built by [`PassiveDynamics::kronecker`] also keep their two
/// factors so that products with `P̄` can skip the dense table.
#[derive(Debug, Clone)]
pub struct PassiveDynamics {
    probs: DenseMatrix,
    factors: Option<(DenseMatrix, DenseMatrix)>,
}

impl PartialEq for PassiveDynamics {
    fn eq(&self, other: &Self) -> bool {
        self.probs == other.probs
    }
}

impl PassiveDynamics {
    /// Validates an already-normalized table.
    pub fn new(probs: DenseMatrix) -> Result<Self> {
        check_square(&probs, "passive dynamics")?;
        for (i, row) in probs.row_iter().enumerate() {
            check_probability_row(row).map_err(|reason| Error::InvalidPassive { row: i, reason })?;
        }
        Ok(Self { probs, factors: None })
    }

    /// `a ⊗ b`: state `(i, k)` at index `i * b.len() + k` moves to `(j, l)`
    /// with probability `a_ij b_kl`.
    pub fn kronecker(a: &PassiveDynamics, b: &PassiveDynamics) -> Self {
        let (na, nb) = (a.len(), b.len());
        let n = na * nb;
        let mut probs = DenseMatrix::zeros(n, n);
        for i in 0..na {
            for k in 0..nb {
                let row = probs.row_mut(i * nb + k);
                for j in 0..na {
                    let aij = a.get(i, j);
                    for l in 0..nb {
                        row[j * nb + l] = aij * b.get(k, l);
                    }
                }
            }
        }
        Self {
            probs,
            factors: Some((a.probs.clone(), b.probs.clone())),
        }
    }

    pub fn factors(&self) -> Option<(&DenseMatrix, &DenseMatrix)> {
        self.factors.as_ref().map(|(a, b)| (a, b))
    }

    /// `P̄ x`, through the factors when available.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        match self.factors() {
            Some((a, b)) => crate::matrix::kron_mul_vec(a, b, x, false),
            None => self.probs.mul_vec(x),
        }
    }

    /// `P̄ᵀ x`, through the factors when available.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        match self.factors() {
            Some((a, b)) => crate::matrix::kron_mul_vec(a, b, x, true),
            None => self.probs.mul_vec_transposed(x),
        }
    }

    /// Normalizes nonnegative weights row by row.
    pub fn from_weights(mut weights: DenseMatrix) -> Result<Self> {
        check_square(&weights, "passive dynamics")?;
        for i in 0..weights.rows() {
            let row = weights.row_mut(i);
            if let Some(&bad) = row.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidPassive {
                    row: i,
                    reason: format!("weight {bad} is not a finite nonnegative number"),
                });
            }
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::InvalidPassive {
                    row: i,
                    reason: "row has no mass".into(),
                });
            }
            row.iter_mut().for_each(|w| *w /= sum);
        }
        Self::new(weights)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs.get(i, j)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.probs
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.probs
    }
}

fn check_square(m: &DenseMatrix, context: &'static str) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: m.rows(),
            found: m.cols(),
        });
    }
    if m.rows() == 0 {
        return Err(Error::param("probs", "empty transition table"));
    }
    Ok(())
}

fn check_probability_row(row: &[f64]) -> core::result::Result<(), alloc::string::String> {
    if let Some(&p) = row.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
        return Err(format!("entry {p} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if math::abs(sum - 1.0) > ROW_SUM_TOL {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// Immediate state costs `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    values: Vec<f64>,
}

impl CostVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &r) in values.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::InvalidCost {
                    state: i,
                    reason: format!("cost {r} is not finite"),
                });
            }
            if exp(-r) <= 0.0 {
                return Err(Error::InvalidCost {
                    state: i,
                    reason: format!("exp(-{r}) underflows to zero"),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Costs-to-go `v`; desirability is `z = exp(-v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostToGo {
    values: Vec<f64>,
}

impl CostToGo {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "cost_to_go",
                format!("value {} at state {i} is not finite", values[i]),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn desirability(&self) -> Vec<f64> {
        self.values.iter().map(|&v| exp(-v)).collect()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Subtracts the minimum so that `min v = 0`.
pub fn shift_min_zero(v: &CostToGo) -> CostToGo {
    let min = v.values.iter().copied().fold(f64::INFINITY, f64::min);
    CostToGo {
        values: v.values.iter().map(|&x| x - min).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct LmdpProblem {
    pub grid: StateGrid,
    pub passive: PassiveDynamics,
    pub gamma: f64,
    pub costs: Option<CostVector>,
}

impl LmdpProblem {
    pub fn new(
        grid: StateGrid,
        passive: PassiveDynamics,
        gamma: f64,
        costs: Option<CostVector>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} is outside [0, 1]")));
        }
        if passive.len() != grid.count() {
            return Err(Error::DimensionMismatch {
                context: "passive dynamics vs grid",
                expected: grid.count(),
                found: passive.len(),
            });
        }
        if let Some(c) = &costs {
            if c.len() != grid.count() {
                return Err(Error::DimensionMismatch {
                    context: "state costs vs grid",
                    expected: grid.count(),
                    found: c.len(),
                });
            }
        }
        Ok(Self {
            grid,
            passive,
            gamma,
            costs,
        })
    }

    pub fn len(&self) -> usize {
        self.passive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passive.is_empty()
    }
}

/// Controlled transition table `p*_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPolicy {
    probs: DenseMatrix,
}

impl ControlledPolicy {
    pub fn new(probs: DenseMatrix) -> Result<Self> {
        check_square(&probs, "controlled policy")?;
        for (i, row) in probs.row_iter().enumerate() {
            check_probability_row(row).map_err(|reason| Error::InvalidPassive { row: i, reason })?;
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs.get(i, j)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.probs
    }

    /// Controls `u_ij = log(p_ij / p̄_ij)`, zero where `p̄_ij = 0`.
    pub fn controls(&self, passive: &PassiveDynamics) -> Result<DenseMatrix> {
        if passive.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "controls",
                expected: self.len(),
                found: passive.len(),
            });
        }
        let n = self.len();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let pb = passive.get(i, j);
                if pb > 0.0 {
                    u.set(i, j, ln(self.get(i, j)) - ln(pb));
                }
            }
        }
        Ok(u)
    }
}

/// `log Σ_j p̄_ij exp(-scale * v_j)` over the support of row `i`.
pub(crate) fn log_expected_desirability(row: &[f64], v: &[f64], scale: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (&p, &vj) in row.iter().zip(v) {
        if p > 0.0 {
            max = max.max(ln(p) - scale * vj);
        }
    }
    let sum: f64 = row
        .iter()
        .zip(v)
        .filter(|(p, _)| **p > 0.0)
        .map(|(&p, &vj)| exp(ln(p) - scale * vj - max))
        .sum();
    max + ln(sum)
}

/// Optimal controlled dynamics `p*_ij ∝ p̄_ij exp(-γ v_j)`.
pub fn optimal_policy(problem: &LmdpProblem, v: &CostToGo) -> Result<ControlledPolicy> {
    let n = problem.len();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context: "cost-to-go vs problem",
            expected: n,
            found: v.len(),
        });
    }
    let gamma = problem.gamma;
    let mut probs = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let prow = problem.passive.row(i);
        let log_norm = log_expected_desirability(prow, v.values(), gamma);
        let out = probs.row_mut(i);
        let mut sum = 0.0;
        for ((o, &p), &vj) in out.iter_mut().zip(prow).zip(v.values()) {
            if p > 0.0 {
                *o = exp(ln(p) - gamma * vj - log_norm);
                sum += *o;
            }
        }
        out.iter_mut().for_each(|o| *o /= sum);
    }
    Ok(ControlledPolicy { probs })
}

/// `KL(p_i || p̄_i)`, the control cost paid in a state.
pub fn control_cost(policy_row: &[f64], passive_row: &[f64]) -> Result<f64> {
    if policy_row.len() != passive_row.len() {
        return Err(Error::DimensionMismatch {
            context: "control cost rows",
            expected: passive_row.len(),
            found: policy_row.len(),
        });
    }
    let mut kl = 0.0;
    for (j, (&p, &q)) in policy_row.iter().zip(passive_row).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::AbsoluteContinuity { state: j });
        }
        kl += p * (ln(p) - ln(q));
    }
    // rounding can push an exact zero slightly negative
    Ok(kl.max(0.0))
}

/// Result of [`z_iteration`].
#[derive(Debug, Clone)]
pub struct ZSolution {
    pub cost_to_go: CostToGo,
    /// Principal eigenvalue of `diag(exp(-r)) P̄`.
    pub lambda: f64,
    pub iterations: usize,
}

impl ZSolution {
    /// Average cost per step, `-log λ`.
    pub fn average_cost(&self) -> f64 {
        -ln(self.lambda)
    }
}

pub const DEFAULT_Z_TOL: f64 = 1e-10;
pub const DEFAULT_Z_MAX_ITER: usize = 100_000;

/// Power iteration on `z = (1/λ) diag(exp(-r)) P̄ z` starting from `z = 1`.
///
/// Each sweep takes `λ` as the largest entry of the un-normalized iterate and
/// divides by it, so the returned `z` has maximum 1 and `v = -log z` has
/// minimum 0. Iteration stops when the max-norm change of `log z` falls below
/// `tol`; since `z ≤ 1` this also bounds the max-norm change of `z`.
pub fn z_iteration(
    passive: &PassiveDynamics,
    costs: &CostVector,
    tol: f64,
    max_iter: usize,
) -> Result<ZSolution> {
    let n = passive.len();
    if costs.len() != n {
        return Err(Error::DimensionMismatch {
            context: "state costs vs passive dynamics",
            expected: n,
            found: costs.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let g: Vec<f64> = costs.values().iter().map(|&r| exp(-r)).collect();
    let mut z = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for iteration in 1..=max_iter {
        for (i, out) in next.iter_mut().enumerate() {
            let row = passive.row(i);
            *out = g[i] * row.iter().zip(&z).map(|(p, zj)| p * zj).sum::<f64>();
        }
        let lambda = next.iter().copied().fold(0.0, f64::max);
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::CollapsedDesirability { state: 0 });
        }
        change = 0.0;
        for (i, (zn, zo)) in next.iter_mut().zip(&mut z).enumerate() {
            *zn /= lambda;
            if !(*zn >= f64::MIN_POSITIVE) {
                return Err(Error::CollapsedDesirability { state: i });
            }
            change = f64::max(change, math::abs(ln(*zn) - ln(*zo)));
        }
        core::mem::swap(&mut z, &mut next);
        if change < tol {
            let v = z.iter().map(|&x| -ln(x)).collect();
            return Ok(ZSolution {
                cost_to_go: CostToGo { values: v },
                lambda,
                iterations: iteration,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        change,
    })
}

/// `r_i = v_i - log λ + log Σ_j p̄_ij exp(-v_j)`, the inverse of
/// [`z_iteration`]'s fixed point.
pub fn recover_state_costs(
    v: &CostToGo,
    passive: &PassiveDynamics,
    lambda: f64,
) -> Result<CostVector> {
    if v.len() != passive.len() {
        return Err(Error::DimensionMismatch {
            context: "cost-to-go vs passive dynamics",
            expected: passive.len(),
            found: v.len(),
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    let log_lambda = ln(lambda);
    let r = (0..v.len())
        .map(|i| v.values()[i] - log_lambda + log_expected_desirability(passive.row(i), v.values(), 1.0))
        .collect();
    CostVector::new(r)
}

/// Max-norm violation of the average-cost Bellman equation
/// `v_i = r_i + log λ + KL(p*_i || p̄_i) + γ Σ_j p*_ij v_j`,
/// with `p*` the optimal policy for `v` and `-log λ` the average cost.
pub fn bellman_residual(problem: &LmdpProblem, v: &CostToGo, lambda: f64) -> Result<f64> {
    let costs = problem
        .costs
        .as_ref()
        .ok_or_else(|| Error::param("costs", "the problem has no state costs"))?;
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    let policy = optimal_policy(problem, v)?;
    let log_lambda = ln(lambda);
    let mut worst: f64 = 0.0;
    for i in 0..problem.len() {
        let prow = policy.row(i);
        let kl = control_cost(prow, problem.passive.row(i))?;
        let expected: f64 = prow.iter().zip(v.values()).map(|(p, vj)| p * vj).sum();
        let rhs = costs.values()[i] + log_lambda + kl + problem.gamma * expected;
        worst = worst.max(math::abs(v.values()[i] - rhs));
    }
    Ok(worst)
}
