//! Mean-field Gaussian variational approximation fitted by stochastic
//! gradient ascent on the reparameterized ELBO.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Diagnostics, LogDensity, Method, ParameterVector, PosteriorSample, VariationalDiagnostics};
use crate::error::{Error, Result};
use crate::math::{exp, sqrt, LN_2PI};
use crate::rng::{standard_normal, stream, StreamRng};

const FIT_STREAM: u64 = 0x7669_6669;
const DRAW_STREAM: u64 = 0x7669_6472;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationalConfig {
    pub max_iter: usize,
    /// Monte Carlo draws per gradient estimate.
    pub n_mc_grad: usize,
    /// Monte Carlo draws for the reported final ELBO.
    pub n_mc_elbo: usize,
    pub learning_rate: f64,
    /// Learning rate decays as `lr / sqrt(1 + t / decay_steps)`.
    pub decay_steps: f64,
    /// Fraction of final iterates averaged into the reported approximation.
    pub average_fraction: f64,
    pub elbo_window: usize,
    /// Consecutive windows far below the best window mean before the fit
    /// is declared divergent.
    pub patience: usize,
    pub n_draws: usize,
    pub init_log_sd: f64,
    pub seed: u64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            n_mc_grad: 8,
            n_mc_elbo: 200,
            learning_rate: 0.05,
            decay_steps: 1000.0,
            average_fraction: 0.25,
            elbo_window: 100,
            patience: 5,
            n_draws: 1000,
            init_log_sd: 0.0,
            seed: 0,
        }
    }
}

impl VariationalConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.max_iter > 0, "max_iter", "must be positive"),
            (self.n_mc_grad > 0, "n_mc_grad", "must be positive"),
            (self.n_mc_elbo > 0, "n_mc_elbo", "must be positive"),
            (self.n_draws > 0, "n_draws", "must be positive"),
            (self.elbo_window > 0, "elbo_window", "must be positive"),
            (self.patience > 0, "patience", "must be positive"),
            (
                self.learning_rate > 0.0 && self.learning_rate.is_finite(),
                "learning_rate",
                "must be positive and finite",
            ),
            (self.decay_steps > 0.0, "decay_steps", "must be positive"),
            (
                self.average_fraction > 0.0 && self.average_fraction <= 1.0,
                "average_fraction",
                "must lie in (0, 1]",
            ),
            (self.init_log_sd.is_finite(), "init_log_sd", "must be finite"),
        ];
        for (ok, name, reason) in checks {
            if !ok {
                return Err(Error::param(name, reason));
            }
        }
        Ok(())
    }
}

/// Fitted mean-field approximation `N(mean, diag(exp(log_sd))²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalFit {
    pub mean: Vec<f64>,
    pub log_sd: Vec<f64>,
    pub diagnostics: VariationalDiagnostics,
}

impl VariationalFit {
    pub fn sd(&self) -> Vec<f64> {
        self.log_sd.iter().map(|&w| exp(w)).collect()
    }

    pub fn draw(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, 0, DRAW_STREAM);
        let sd = self.sd();
        (0..n)
            .map(|_| {
                self.mean
                    .iter()
                    .zip(&sd)
                    .map(|(m, s)| m + s * standard_normal(&mut rng))
                    .collect()
            })
            .collect()
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0.0,
        }
    }

    /// Ascent step on `x` along `g`.
    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1.0;
        let c1 = 1.0 - libm::pow(Self::B1, self.t);
        let c2 = 1.0 - libm::pow(Self::B2, self.t);
        for i in 0..x.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            x[i] += lr * (self.m[i] / c1) / (sqrt(self.v[i] / c2) + Self::EPS);
        }
    }
}

fn entropy(log_sd: &[f64]) -> f64 {
    log_sd.iter().sum::<f64>() + 0.5 * log_sd.len() as f64 * (1.0 + LN_2PI)
}

/// ELBO estimate and its gradient in `(mean, log_sd)`.
fn elbo_grad<T: LogDensity>(
    target: &T,
    mean: &[f64],
    log_sd: &[f64],
    n_mc: usize,
    rng: &mut StreamRng,
    g_mean: &mut [f64],
    g_log_sd: &mut [f64],
) -> f64 {
    let dim = mean.len();
    g_mean.fill(0.0);
    g_log_sd.fill(0.0);
    let mut eps = vec![0.0; dim];
    let mut theta = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut lp_sum = 0.0;
    for _ in 0..n_mc {
        for i in 0..dim {
            eps[i] = standard_normal(rng);
            theta[i] = mean[i] + exp(log_sd[i]) * eps[i];
        }
        lp_sum += target.log_density_grad(&theta, &mut grad);
        for i in 0..dim {
            g_mean[i] += grad[i];
            g_log_sd[i] += grad[i] * eps[i] * exp(log_sd[i]);
        }
    }
    let k = n_mc as f64;
    for i in 0..dim {
        g_mean[i] /= k;
        g_log_sd[i] = g_log_sd[i] / k + 1.0;
    }
    lp_sum / k + entropy(log_sd)
}

/// Fits the approximation to an arbitrary target starting at `init`.
pub fn fit_variational_target<T: LogDensity>(
    target: &T,
    init: &[f64],
    config: &VariationalConfig,
) -> Result<VariationalFit> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "initial point",
            expected: dim,
            found: init.len(),
        });
    }
    let mut rng = stream(config.seed, 0, FIT_STREAM);
    let mut params: Vec<f64> = init.to_vec();
    params.extend(core::iter::repeat_n(config.init_log_sd, dim));
    let mut grad = vec![0.0; 2 * dim];
    let mut adam = Adam::new(2 * dim);

    let n_avg = ((config.max_iter as f64 * config.average_fraction) as usize).max(1);
    let avg_start = config.max_iter - n_avg;
    let mut avg = vec![0.0; 2 * dim];

    let mut trace = Vec::new();
    let mut window_sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut bad_windows = 0;
    for t in 0..config.max_iter {
        let (mean, log_sd) = params.split_at(dim);
        let (gm, gs) = grad.split_at_mut(dim);
        let elbo = elbo_grad(target, mean, log_sd, config.n_mc_grad, &mut rng, gm, gs);
        if !elbo.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: t });
        }
        let lr = config.learning_rate / sqrt(1.0 + t as f64 / config.decay_steps);
        adam.step(&mut params, &grad, lr);
        if t >= avg_start {
            for (a, p) in avg.iter_mut().zip(&params) {
                *a += p / n_avg as f64;
            }
        }
        window_sum += elbo;
        if (t + 1) % config.elbo_window == 0 {
            let window_mean = window_sum / config.elbo_window as f64;
            window_sum = 0.0;
            trace.push(window_mean);
            if window_mean > best {
                best = window_mean;
                bad_windows = 0;
            } else if window_mean < best - (0.5 * best.abs() + 10.0) {
                bad_windows += 1;
                if bad_windows >= config.patience {
                    return Err(Error::ElboDiverged {
                        iteration: t + 1,
                        window_mean,
                        best,
                    });
                }
            } else {
                bad_windows = 0;
            }
        }
    }

    let (mean, log_sd) = avg.split_at(dim);
    let mut gm = vec![0.0; dim];
    let mut gs = vec![0.0; dim];
    let final_elbo = elbo_grad(target, mean, log_sd, config.n_mc_elbo, &mut rng, &mut gm, &mut gs);
    Ok(VariationalFit {
        mean: mean.to_vec(),
        log_sd: log_sd.to_vec(),
        diagnostics: VariationalDiagnostics {
            elbo_trace: trace,
            elbo_window: config.elbo_window,
            final_elbo,
            iterations: config.max_iter,
        },
    })
}

/// Fits the approximation over `(β, log τ)` and returns `config.n_draws`
/// draws from it.
pub fn fit_variational<T: LogDensity>(
    target: &T,
    init: &ParameterVector,
    config: &VariationalConfig,
) -> Result<PosteriorSample> {
    let fit = fit_variational_target(target, &init.to_flat(), config)?;
    let draws = fit
        .draw(config.n_draws, config.seed)
        .iter()
        .map(|x| ParameterVector::from_flat(x))
        .collect();
    Ok(PosteriorSample {
        draws,
        chain: vec![0; config.n_draws],
        method: Method::Variational,
        diagnostics: Diagnostics::Variational(fit.diagnostics),
    })
}
