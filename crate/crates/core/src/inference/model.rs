use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::LogDensity;
use crate::basis::FeatureMatrix;
use crate::error::{Error, Result};
use crate::lmdp::{log_expected_desirability, PassiveDynamics};
use crate::math::{exp, ln, ln_gamma, LN_2PI};
use crate::matrix::dot;
use crate::spp::TransitionCounts;

/// Row sums below this are recomputed with per-row centering.
const UNDERFLOW_GUARD: f64 = 1e-250;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self { shape: 0.1, rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub beta: Vec<f64>,
    /// `log τ`, the unconstrained prior precision.
    pub log_tau: f64,
}

impl ParameterVector {
    pub fn zeros(n_basis: usize) -> Self {
        Self {
            beta: vec![0.0; n_basis],
            log_tau: 0.0,
        }
    }

    pub fn tau(&self) -> f64 {
        exp(self.log_tau)
    }

    /// `[β..., log τ]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = self.beta.clone();
        x.push(self.log_tau);
        x
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let (beta, last) = x.split_at(x.len() - 1);
        Self {
            beta: beta.to_vec(),
            log_tau: last[0],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.log_tau.is_finite() && self.beta.iter().all(|b| b.is_finite())
    }
}

/// Visited origin states sharing one passive row, with their pooled
/// outgoing count. The likelihood depends on an origin only through these.
#[derive(Debug, Clone)]
struct OriginGroup {
    state: usize,
    total: f64,
    /// Strictly positive columns, or `None` when the whole row is.
    support: Option<Vec<usize>>,
}

fn group_origins(counts: &TransitionCounts, passive: &PassiveDynamics) -> Vec<OriginGroup> {
    let mut groups: Vec<OriginGroup> = Vec::new();
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    for (i, t) in counts.row_totals().into_iter().enumerate() {
        if t == 0 {
            continue;
        }
        let row = passive.row(i);
        let key: Vec<u64> = row.iter().map(|p| p.to_bits()).collect();
        if let Some(&g) = index.get(&key) {
            groups[g].total += t as f64;
            continue;
        }
        index.insert(key, groups.len());
        let dense = row.iter().all(|&p| p > 0.0);
        groups.push(OriginGroup {
            state: i,
            total: t as f64,
            support: (!dense).then(|| (0..row.len()).filter(|&j| row[j] > 0.0).collect()),
        });
    }
    groups
}

/// Data, passive dynamics and features of the inverse problem.
#[derive(Debug, Clone)]
pub struct IrlModel {
    counts: TransitionCounts,
    passive: PassiveDynamics,
    features: FeatureMatrix,
    gamma: f64,
    prior: GammaPrior,
    origins: Vec<OriginGroup>,
    incoming: Vec<f64>,
    log_passive_term: f64,
}

impl IrlModel {
    pub fn new(
        counts: TransitionCounts,
        passive: PassiveDynamics,
        features: FeatureMatrix,
        gamma: f64,
    ) -> Result<Self> {
        let n = passive.len();
        for (context, found) in [
            ("transition counts vs passive dynamics", counts.len()),
            ("feature rows vs passive dynamics", features.n_states()),
        ] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found,
                });
            }
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} is outside [0, 1]")));
        }
        if counts.total() == 0 {
            return Err(Error::EmptyCounts);
        }
        let mut log_passive_term = 0.0;
        for (i, j, y) in counts.nonzero() {
            let p = passive.get(i, j);
            if p <= 0.0 {
                return Err(Error::IncompatibleTransition { from: i, to: j });
            }
            log_passive_term += y as f64 * ln(p);
        }
        let origins = group_origins(&counts, &passive);
        let incoming = counts.column_totals().into_iter().map(|c| c as f64).collect();
        Ok(Self {
            counts,
            passive,
            features,
            gamma,
            prior: GammaPrior::default(),
            origins,
            incoming,
            log_passive_term,
        })
    }

    pub fn with_prior(mut self, prior: GammaPrior) -> Self {
        self.prior = prior;
        self
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn passive(&self) -> &PassiveDynamics {
        &self.passive
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn prior(&self) -> GammaPrior {
        self.prior
    }

    pub fn n_states(&self) -> usize {
        self.passive.len()
    }

    pub fn n_basis(&self) -> usize {
        self.features.n_basis()
    }

    pub fn cost_to_go(&self, beta: &[f64]) -> Vec<f64> {
        self.features.apply(beta)
    }

    /// Log-likelihood as a function of `v` directly.
    pub fn log_likelihood_v(&self, v: &[f64]) -> f64 {
        self.likelihood_v(v, None)
    }

    /// Log-likelihood and its gradient with respect to `v`.
    pub fn log_likelihood_v_grad(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; v.len()];
        let ll = self.likelihood_v(v, Some(&mut grad));
        (ll, grad)
    }

    /// `Σ_ij y_ij [log p̄_ij − γ v_j − log Σ_k p̄_ik exp(−γ v_k)]`.
    ///
    /// The normalizers are computed against `exp(−γ (v − min v))`, which is
    /// at most 1; rows whose sum would underflow are recentred on their own
    /// maximum term.
    fn likelihood_v(&self, v: &[f64], grad: Option<&mut Vec<f64>>) -> f64 {
        let gamma = self.gamma;
        let shift = gamma * v.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = v.iter().map(|&x| exp(shift - gamma * x)).collect();
        let mut ll = self.log_passive_term;
        ll -= gamma * self.incoming.iter().zip(v).map(|(c, x)| c * x).sum::<f64>();
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            for (gj, c) in g.iter_mut().zip(&self.incoming) {
                *gj = -gamma * c;
            }
        }
        // u accumulates Σ_i n_i p̄_i / s_i over rows normalized against w
        let factored = self.passive.factors().is_some();
        let s_all = if factored { Some(self.passive.mul_vec(&w)) } else { None };
        let mut c = if factored { vec![0.0; v.len()] } else { Vec::new() };
        let mut u = if factored { Vec::new() } else { vec![0.0; v.len()] };
        let mut any_shifted = false;
        for row in &self.origins {
            let probs = self.passive.row(row.state);
            let s = match (&s_all, &row.support) {
                (Some(all), _) => all[row.state],
                (None, None) => dot(probs, &w),
                (None, Some(cols)) => cols.iter().map(|&k| probs[k] * w[k]).sum(),
            };
            if s > UNDERFLOW_GUARD {
                ll -= row.total * (ln(s) - shift);
                if grad.is_some() {
                    any_shifted = true;
                    let scale = row.total / s;
                    match (factored, &row.support) {
                        (true, _) => c[row.state] += scale,
                        (false, None) => u.iter_mut().zip(probs).for_each(|(ui, p)| *ui += scale * p),
                        (false, Some(cols)) => cols.iter().for_each(|&k| u[k] += scale * probs[k]),
                    }
                }
            } else {
                let lse = log_expected_desirability(probs, v, gamma);
                ll -= row.total * lse;
                if let Some(g) = grad.as_deref_mut() {
                    for (k, &p) in probs.iter().enumerate() {
                        if p > 0.0 {
                            g[k] += gamma * row.total * exp(ln(p) - gamma * v[k] - lse);
                        }
                    }
                }
            }
        }
        if let (Some(g), true) = (grad, any_shifted) {
            if factored {
                u = self.passive.mul_vec_transposed(&c);
            }
            for ((gk, uk), wk) in g.iter_mut().zip(&u).zip(&w) {
                *gk += gamma * uk * wk;
            }
        }
        ll
    }

    pub fn log_likelihood(&self, params: &ParameterVector) -> f64 {
        self.log_likelihood_v(&self.cost_to_go(&params.beta))
    }

    /// `log N(β; 0, τ⁻¹ I) + log Gamma(τ; a, b) + log τ`, the last term
    /// being the Jacobian of `τ = exp(log τ)`.
    pub fn log_prior(&self, params: &ParameterVector) -> f64 {
        let (a, b) = (self.prior.shape, self.prior.rate);
        let nb = params.beta.len() as f64;
        let lt = params.log_tau;
        let tau = exp(lt);
        let sq: f64 = params.beta.iter().map(|x| x * x).sum();
        let normal = 0.5 * nb * (lt - LN_2PI) - 0.5 * tau * sq;
        let gamma_density = a * ln(b) - ln_gamma(a) + (a - 1.0) * lt - b * tau;
        normal + gamma_density + lt
    }

    pub fn log_posterior(&self, params: &ParameterVector) -> f64 {
        self.log_likelihood(params) + self.log_prior(params)
    }

    /// Log posterior and its gradient in `(β, log τ)`.
    pub fn grad_log_posterior(&self, params: &ParameterVector) -> (f64, ParameterVector) {
        let v = self.cost_to_go(&params.beta);
        let (ll, gv) = self.log_likelihood_v_grad(&v);
        let mut gbeta = self.features.apply_transpose(&gv);
        let tau = params.tau();
        for (g, b) in gbeta.iter_mut().zip(&params.beta) {
            *g -= tau * b;
        }
        let (a, rate) = (self.prior.shape, self.prior.rate);
        let sq: f64 = params.beta.iter().map(|x| x * x).sum();
        let nb = params.beta.len() as f64;
        let glt = 0.5 * nb + a - tau * (0.5 * sq + rate);
        (
            ll + self.log_prior(params),
            ParameterVector {
                beta: gbeta,
                log_tau: glt,
            },
        )
    }
}

impl LogDensity for IrlModel {
    fn dim(&self) -> usize {
        self.n_basis() + 1
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let params = ParameterVector::from_flat(x);
        let (lp, g) = self.grad_log_posterior(&params);
        let nb = g.beta.len();
        grad[..nb].copy_from_slice(&g.beta);
        grad[nb] = g.log_tau;
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gaussian_basis_1d, identity_features, Metric};
    use crate::grid::StateGrid;
    use crate::matrix::DenseMatrix;
    use alloc::vec;

    fn uniform(n: usize) -> PassiveDynamics {
        PassiveDynamics::from_weights(DenseMatrix::from_row_major(n, n, vec![1.0; n * n]).unwrap()).unwrap()
    }

    fn two_state_model() -> IrlModel {
        let counts = TransitionCounts::from_entries(2, [(0, 0, 3), (0, 1, 1)]).unwrap();
        IrlModel::new(counts, uniform(2), identity_features(2).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn hand_evaluated_likelihood() {
        let m = two_state_model();
        let p = ParameterVector {
            beta: vec![0.0, ln(3.0)],
            log_tau: 0.0,
        };
        let expected = 3.0 * ln(0.75) + ln(0.25);
        assert!((m.log_likelihood(&p) - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_weights_give_passive_likelihood() {
        let m = two_state_model();
        let expected = 4.0 * ln(0.5);
        assert!((m.log_likelihood(&ParameterVector::zeros(2)) - expected).abs() < 1e-14);
    }

    #[test]
    fn prior_closed_form_at_unit_precision() {
        let m = two_state_model();
        let lp = m.log_prior(&ParameterVector::zeros(2));
        let (a, b) = (0.1f64, 0.1f64);
        let gamma_at_one = a * ln(b) - ln_gamma(a) - b;
        let expected = (2.0 / 2.0) * ln(1.0 / (2.0 * core::f64::consts::PI)) + gamma_at_one;
        assert!((lp - expected).abs() < 1e-13);
        let mut bigger = ParameterVector::zeros(2);
        bigger.beta = vec![1.0, 1.0];
        let mut biggest = bigger.clone();
        biggest.beta = vec![2.0, 1.0];
        assert!(m.log_prior(&bigger) < lp);
        assert!(m.log_prior(&biggest) < m.log_prior(&bigger));
    }

    #[test]
    fn errors_on_bad_inputs() {
        let p = PassiveDynamics::new(DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap()).unwrap();
        let counts = TransitionCounts::from_entries(2, [(0, 1, 2)]).unwrap();
        let err = IrlModel::new(counts, p, identity_features(2).unwrap(), 1.0).unwrap_err();
        assert_eq!(err, Error::IncompatibleTransition { from: 0, to: 1 });
        let err = IrlModel::new(TransitionCounts::zeros(2), uniform(2), identity_features(2).unwrap(), 1.0).unwrap_err();
        assert_eq!(err, Error::EmptyCounts);
        let counts = TransitionCounts::from_entries(3, [(0, 1, 2)]).unwrap();
        assert!(IrlModel::new(counts, uniform(2), identity_features(2).unwrap(), 1.0).is_err());
    }

    #[test]
    fn symmetric_uniform_counts_have_zero_likelihood_gradient() {
        let n = 4;
        let counts = TransitionCounts::from_entries(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j, 5)))).unwrap();
        let m = IrlModel::new(counts, uniform(n), identity_features(n).unwrap(), 1.0).unwrap();
        let (_, g) = m.log_likelihood_v_grad(&[0.0; 4]);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn underflowing_rows_fall_back_to_row_centering() {
        // state 1 is far costlier than state 0; row 1 only reaches state 1
        let p = PassiveDynamics::new(DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap()).unwrap();
        let counts = TransitionCounts::from_entries(2, [(1, 1, 4), (0, 0, 1)]).unwrap();
        let m = IrlModel::new(counts, p, identity_features(2).unwrap(), 1.0).unwrap();
        let v = [0.0, 900.0];
        let (ll, g) = m.log_likelihood_v_grad(&v);
        // row 1 contributes log 1 = 0; row 0 contributes log p*(0|0) ≈ 0
        assert!(ll.abs() < 1e-12, "{ll}");
        assert!(g.iter().all(|x| x.is_finite()));
        assert!(g[1].abs() < 1e-12);
    }

    #[test]
    fn gaussian_features_chain_through() {
        let g = StateGrid::misalignment();
        let x = gaussian_basis_1d(&g, 2, 10.0, Metric::Circular).unwrap();
        let counts = TransitionCounts::from_entries(36, [(17, 17, 10), (17, 18, 3), (5, 6, 1)]).unwrap();
        let m = IrlModel::new(counts, uniform(36), x, 1.0).unwrap();
        assert_eq!(m.dim(), 19);
        let mut grad = vec![0.0; 19];
        let lp = m.log_density_grad(&vec![0.1; 19], &mut grad);
        assert!(lp.is_finite());
        assert!(grad.iter().all(|x| x.is_finite()));
    }
}
