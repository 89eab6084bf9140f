//! No-U-turn sampler with multinomial trajectory sampling, a diagonal
//! metric and windowed warmup adaptation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::diagnostics::{effective_sample_size, split_rhat};
use super::{ChainDiagnostics, Diagnostics, LogDensity, McmcDiagnostics, Method, ParameterVector, PosteriorSample};
use crate::error::{Error, Result};
use crate::math::{exp, ln, log_add_exp, sqrt};
use crate::rng::{standard_normal, stream, uniform, StreamRng};

const MAX_DELTA_H: f64 = 1000.0;
const NUTS_STREAM: u64 = 0x6e75_7473;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NutsConfig {
    pub n_warmup: usize,
    pub n_samples: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub init_step_size: f64,
    /// Runs with a larger divergent fraction are rejected.
    pub max_divergence_fraction: f64,
    pub adapt_metric: bool,
    pub seed: u64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        Self {
            n_warmup: 1000,
            n_samples: 1000,
            n_chains: 4,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_step_size: 1.0,
            max_divergence_fraction: 0.05,
            adapt_metric: true,
            seed: 0,
        }
    }
}

impl NutsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be positive"));
        }
        if self.n_chains == 0 {
            return Err(Error::param("n_chains", "must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::param("target_accept", "must lie in (0, 1)"));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::param("max_tree_depth", "must be positive"));
        }
        if !(self.init_step_size > 0.0 && self.init_step_size.is_finite()) {
            return Err(Error::param("init_step_size", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.max_divergence_fraction) {
            return Err(Error::param("max_divergence_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub draws: Vec<Vec<f64>>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub diagnostics: ChainDiagnostics,
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Sampler<'a, T: LogDensity> {
    target: &'a T,
    inv_metric: Vec<f64>,
    step: f64,
    max_depth: usize,
    rng: StreamRng,
    n_leapfrog: usize,
}

struct TreeTotals {
    sum_metro: f64,
    divergent: bool,
}

/// Momenta and sharp momenta at both ends of a (sub)tree.
struct Ends<'v> {
    p_sharp_beg: &'v mut Vec<f64>,
    p_sharp_end: &'v mut Vec<f64>,
    p_beg: &'v mut Vec<f64>,
    p_end: &'v mut Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

impl<'a, T: LogDensity> Sampler<'a, T> {
    fn evaluate(&self, q: Vec<f64>) -> Point {
        let mut grad = vec![0.0; q.len()];
        let logp = self.target.log_density_grad(&q, &mut grad);
        Point {
            p: vec![0.0; q.len()],
            q,
            grad,
            logp,
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(x, m)| x * x * m).sum::<f64>()
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(x, m)| x * m).collect()
    }

    fn draw_momentum(&mut self, z: &mut Point) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            *p = standard_normal(&mut self.rng) / sqrt(*m);
        }
    }

    fn leapfrog(&mut self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.logp = self.target.log_density_grad(&z.q, &mut z.grad);
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        self.n_leapfrog += 1;
    }

    /// Extends the frontier `z` by `2^depth` steps. Returns false if the
    /// subtree diverged or turned back on itself.
    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        ends: Ends<'_>,
        rho: &mut [f64],
        h0: f64,
        sign: f64,
        totals: &mut TreeTotals,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.step);
            let h = self.hamiltonian(z);
            if h - h0 > MAX_DELTA_H {
                totals.divergent = true;
            }
            *log_sum_weight = log_add_exp(*log_sum_weight, h0 - h);
            totals.sum_metro += if h0 - h > 0.0 { 1.0 } else { exp(h0 - h) };
            z_propose.clone_from(z);
            let ps = self.p_sharp(&z.p);
            ends.p_sharp_beg.clone_from(&ps);
            *ends.p_sharp_end = ps;
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            ends.p_beg.clone_from(&z.p);
            ends.p_end.clone_from(&z.p);
            return !totals.divergent;
        }
        let dim = z.q.len();

        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let ok = self.build_tree(
            depth - 1,
            z,
            z_propose,
            Ends {
                p_sharp_beg: ends.p_sharp_beg,
                p_sharp_end: &mut p_sharp_init_end,
                p_beg: ends.p_beg,
                p_end: &mut p_init_end,
            },
            &mut rho_init,
            h0,
            sign,
            totals,
            &mut lsw_init,
        );
        if !ok {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let ok = self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            Ends {
                p_sharp_beg: &mut p_sharp_final_beg,
                p_sharp_end: ends.p_sharp_end,
                p_beg: &mut p_final_beg,
                p_end: ends.p_end,
            },
            &mut rho_final,
            h0,
            sign,
            totals,
            &mut lsw_final,
        );
        if !ok {
            return false;
        }

        let lsw_subtree = log_add_exp(lsw_init, lsw_final);
        *log_sum_weight = log_add_exp(*log_sum_weight, lsw_subtree);
        if uniform(&mut self.rng) < exp(lsw_final - lsw_subtree) {
            *z_propose = z_propose_final;
        }

        let rho_subtree = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(ends.p_sharp_beg, ends.p_sharp_end, &rho_subtree);
        persist &= no_u_turn(ends.p_sharp_beg, &p_sharp_final_beg, &add(&rho_init, &p_final_beg));
        persist &= no_u_turn(&p_sharp_init_end, ends.p_sharp_end, &add(&rho_final, &p_init_end));
        persist
    }

    /// One NUTS transition from `z0`; returns the new point and its
    /// acceptance statistic.
    fn transition(&mut self, z0: &Point) -> (Point, f64, bool, bool) {
        let mut start = z0.clone();
        self.draw_momentum(&mut start);
        let h0 = self.hamiltonian(&start);
        let dim = start.q.len();

        let mut z_fwd = start.clone();
        let mut z_bck = start.clone();
        let mut z_sample = start.clone();
        let mut z_propose = start.clone();

        let ps0 = self.p_sharp(&start.p);
        let (mut ps_fwd_fwd, mut ps_fwd_bck, mut ps_bck_fwd, mut ps_bck_bck) =
            (ps0.clone(), ps0.clone(), ps0.clone(), ps0.clone());
        let (mut p_fwd_fwd, mut p_fwd_bck, mut p_bck_fwd, mut p_bck_bck) =
            (start.p.clone(), start.p.clone(), start.p.clone(), start.p.clone());
        let mut rho = start.p.clone();

        let mut log_sum_weight = 0.0;
        let mut totals = TreeTotals {
            sum_metro: 0.0,
            divergent: false,
        };
        let leapfrog_before = self.n_leapfrog;
        let mut depth = 0;
        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if uniform(&mut self.rng) > 0.5 {
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_fwd);
                ps_bck_fwd.clone_from(&ps_fwd_fwd);
                let mut z = z_fwd.clone();
                let ok = self.build_tree(
                    depth,
                    &mut z,
                    &mut z_propose,
                    Ends {
                        p_sharp_beg: &mut ps_fwd_bck,
                        p_sharp_end: &mut ps_fwd_fwd,
                        p_beg: &mut p_fwd_bck,
                        p_end: &mut p_fwd_fwd,
                    },
                    &mut rho_fwd,
                    h0,
                    1.0,
                    &mut totals,
                    &mut lsw_subtree,
                );
                z_fwd = z;
                ok
            } else {
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_bck);
                ps_fwd_bck.clone_from(&ps_bck_bck);
                let mut z = z_bck.clone();
                let ok = self.build_tree(
                    depth,
                    &mut z,
                    &mut z_propose,
                    Ends {
                        p_sharp_beg: &mut ps_bck_fwd,
                        p_sharp_end: &mut ps_bck_bck,
                        p_beg: &mut p_bck_fwd,
                        p_end: &mut p_bck_bck,
                    },
                    &mut rho_bck,
                    h0,
                    -1.0,
                    &mut totals,
                    &mut lsw_subtree,
                );
                z_bck = z;
                ok
            };
            if !valid {
                break;
            }
            depth += 1;

            if lsw_subtree > log_sum_weight || uniform(&mut self.rng) < exp(lsw_subtree - log_sum_weight) {
                z_sample.clone_from(&z_propose);
            }
            log_sum_weight = log_add_exp(log_sum_weight, lsw_subtree);

            rho = add(&rho_bck, &rho_fwd);
            let mut persist = no_u_turn(&ps_bck_bck, &ps_fwd_fwd, &rho);
            persist &= no_u_turn(&ps_bck_bck, &ps_fwd_bck, &add(&rho_bck, &p_fwd_bck));
            persist &= no_u_turn(&ps_bck_fwd, &ps_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
            if !persist {
                break;
            }
        }
        let steps = (self.n_leapfrog - leapfrog_before).max(1);
        let accept = totals.sum_metro / steps as f64;
        (z_sample, accept, totals.divergent, depth >= self.max_depth)
    }

    /// Doubles or halves the step size until a single leapfrog step crosses
    /// an acceptance probability of 0.8.
    fn find_reasonable_step(&mut self, z0: &Point) -> Result<()> {
        let threshold = ln(0.8);
        let delta = |s: &mut Self| {
            let mut z = z0.clone();
            s.draw_momentum(&mut z);
            let h0 = s.hamiltonian(&z);
            let eps = s.step;
            s.leapfrog(&mut z, eps);
            h0 - s.hamiltonian(&z)
        };
        let direction = if delta(self) > threshold { 1.0 } else { -1.0 };
        loop {
            let d = delta(self);
            if (direction > 0.0 && d <= threshold) || (direction < 0.0 && d >= threshold) {
                return Ok(());
            }
            self.step = if direction > 0.0 { 2.0 * self.step } else { 0.5 * self.step };
            if self.step > 1e7 || self.step == 0.0 {
                return Err(Error::NonFinite { iteration: 0 });
            }
        }
    }
}

struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(step: f64, delta: f64) -> Self {
        Self {
            mu: ln(10.0 * step),
            s_bar: 0.0,
            x_bar: 0.0,
            counter: 0.0,
            delta,
        }
    }

    fn learn(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * sqrt(self.counter) / Self::GAMMA;
        let x_eta = exp(-Self::KAPPA * ln(self.counter));
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        exp(x)
    }

    fn final_step(&self) -> f64 {
        exp(self.x_bar)
    }
}

/// Warmup schedule: a fast initial buffer, doubling slow windows for the
/// metric, and a fast terminal buffer.
struct Windows {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
}

impl Windows {
    fn new(n_warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base) = (75, 50, 25);
        if init_buffer + base + term_buffer > n_warmup {
            init_buffer = n_warmup * 15 / 100;
            term_buffer = n_warmup / 10;
            base = n_warmup - (init_buffer + term_buffer);
        }
        Self {
            n_warmup,
            init_buffer,
            term_buffer,
            window_size: base,
            next_window: (init_buffer + base).saturating_sub(1),
            counter: 0,
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.n_warmup - self.term_buffer
            && self.counter != self.n_warmup
    }

    fn window_end(&self) -> bool {
        self.counter == self.next_window && self.counter != self.n_warmup
    }

    fn advance_window(&mut self) {
        if self.next_window == self.n_warmup - self.term_buffer - 1 {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window + 2 * self.window_size >= self.n_warmup - self.term_buffer {
            self.next_window = self.n_warmup - self.term_buffer - 1;
        }
    }
}

/// Welford accumulator for per-coordinate variances.
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = xi - *m;
            *m += d / self.n;
            *s += d * (xi - *m);
        }
    }

    /// Sample variance shrunk towards 1e-3.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|s| (n / (n + 5.0)) * (s / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0)))
            .collect()
    }
}

/// Runs one chain from `init`. The random stream is keyed by
/// `(config.seed, chain)`.
pub fn run_chain<T: LogDensity>(target: &T, init: &[f64], config: &NutsConfig, chain: usize) -> Result<ChainResult> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "initial point",
            expected: dim,
            found: init.len(),
        });
    }
    let mut sampler = Sampler {
        target,
        inv_metric: vec![1.0; dim],
        step: config.init_step_size,
        max_depth: config.max_tree_depth,
        rng: stream(config.seed, chain as u64, NUTS_STREAM),
        n_leapfrog: 0,
    };
    let mut z = sampler.evaluate(init.to_vec());
    if !z.logp.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    sampler.find_reasonable_step(&z)?;
    let mut adapt = DualAveraging::new(sampler.step, config.target_accept);
    let mut windows = Windows::new(config.n_warmup);
    let mut welford = Welford::new(dim);
    let adapt_metric = config.adapt_metric && config.n_warmup >= 20;

    for _ in 0..config.n_warmup {
        let (next, accept, _, _) = sampler.transition(&z);
        z = next;
        sampler.step = adapt.learn(accept);
        if adapt_metric {
            if windows.in_window() {
                welford.add(&z.q);
            }
            if windows.window_end() {
                windows.advance_window();
                sampler.inv_metric = welford.regularized_variance();
                welford = Welford::new(dim);
                sampler.find_reasonable_step(&z)?;
                adapt = DualAveraging::new(sampler.step, config.target_accept);
            }
            windows.counter += 1;
        }
    }
    if config.n_warmup > 0 {
        sampler.step = adapt.final_step();
    }

    sampler.n_leapfrog = 0;
    let mut draws = Vec::with_capacity(config.n_samples);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    let mut max_depth_hits = 0;
    for iteration in 0..config.n_samples {
        let (next, accept, divergent, saturated) = sampler.transition(&z);
        z = next;
        if !z.logp.is_finite() {
            return Err(Error::NonFinite { iteration });
        }
        accept_sum += accept;
        divergences += usize::from(divergent);
        max_depth_hits += usize::from(saturated);
        draws.push(z.q.clone());
    }
    Ok(ChainResult {
        draws,
        step_size: sampler.step,
        inv_metric: sampler.inv_metric,
        diagnostics: ChainDiagnostics {
            chain,
            step_size: sampler.step,
            mean_accept: accept_sum / config.n_samples as f64,
            divergences,
            leapfrog_steps: sampler.n_leapfrog,
            max_depth_hits,
        },
    })
}

/// Pools chains into a posterior sample, computing convergence diagnostics
/// and rejecting runs with too many divergent transitions.
pub fn combine_chains(chains: Vec<ChainResult>, config: &NutsConfig) -> Result<PosteriorSample> {
    let dim = chains.first().map_or(0, |c| c.draws.first().map_or(0, Vec::len));
    let total: usize = chains.iter().map(|c| c.draws.len()).sum();
    let divergences: usize = chains.iter().map(|c| c.diagnostics.divergences).sum();
    let fraction = if total == 0 { 0.0 } else { divergences as f64 / total as f64 };
    if fraction > config.max_divergence_fraction {
        return Err(Error::Divergences {
            divergent: divergences,
            total,
            limit: config.max_divergence_fraction,
        });
    }
    let mut min_ess = f64::INFINITY;
    let mut max_rhat: f64 = 0.0;
    for d in 0..dim {
        let series: Vec<Vec<f64>> = chains.iter().map(|c| c.draws.iter().map(|x| x[d]).collect()).collect();
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        min_ess = min_ess.min(effective_sample_size(&refs));
        max_rhat = max_rhat.max(split_rhat(&refs));
    }
    let mean_accept = chains.iter().map(|c| c.diagnostics.mean_accept).sum::<f64>() / chains.len().max(1) as f64;
    let mut draws = Vec::with_capacity(total);
    let mut chain_ids = Vec::with_capacity(total);
    let mut chain_diag = Vec::with_capacity(chains.len());
    for c in chains {
        chain_ids.extend(core::iter::repeat_n(c.diagnostics.chain, c.draws.len()));
        draws.extend(c.draws.iter().map(|x| ParameterVector::from_flat(x)));
        chain_diag.push(c.diagnostics);
    }
    Ok(PosteriorSample {
        draws,
        chain: chain_ids,
        method: Method::Mcmc,
        diagnostics: Diagnostics::Mcmc(McmcDiagnostics {
            chains: chain_diag,
            divergences,
            divergence_fraction: fraction,
            mean_accept,
            min_ess,
            max_rhat,
        }),
    })
}

/// Runs `config.n_chains` chains sequentially from `init`.
pub fn sample_mcmc<T: LogDensity>(target: &T, init: &[f64], config: &NutsConfig) -> Result<PosteriorSample> {
    let chains = (0..config.n_chains)
        .map(|c| run_chain(target, init, config, c))
        .collect::<Result<Vec<_>>>()?;
    combine_chains(chains, config)
}
