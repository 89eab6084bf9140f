use alloc::vec::Vec;

use crate::math::sqrt;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Autocovariance at `lag` with denominator `n`.
fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / n as f64
}

/// Between/within variance pieces over equal-length chains.
fn variance_parts(chains: &[&[f64]]) -> (f64, f64, usize) {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let m = chains.len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c[..n].iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n as f64 - 1.0))
        .sum::<f64>()
        / m;
    let grand = means.iter().sum::<f64>() / m;
    let b_over_n = if chains.len() > 1 {
        means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (w, b_over_n, n)
}

/// Effective sample size over chains with Geyer's initial monotone
/// sequence estimator.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let (w, b_over_n, n) = variance_parts(chains);
    if n < 4 {
        return f64::NAN;
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    let total = (chains.len() * n) as f64;
    if var_plus <= 0.0 || !var_plus.is_finite() {
        return total;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let rho = |lag: usize| {
        let acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(&c[..n], mu, lag))
            .sum::<f64>()
            / chains.len() as f64;
        1.0 - (w - acov) / var_plus
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        sum += pair;
        prev = pair;
        lag += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / libm::log10(total).max(1.0));
    total / tau
}

/// Potential scale reduction with each chain split in half.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    let (w, b_over_n, n) = variance_parts(&halves);
    if n < 2 || w <= 0.0 {
        return f64::NAN;
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    sqrt(var_plus / w)
}
