use lmdp_irl_core::basis::*;
use lmdp_irl_core::grid::StateGrid;
use lmdp_irl_core::inference::*;
use lmdp_irl_core::lmdp::*;
use lmdp_irl_core::rng::{categorical, stream};
use lmdp_irl_core::spp::TransitionCounts;
use lmdp_irl_core::DenseMatrix;
use proptest::prelude::*;

fn positive_passive(n: usize, w: &[f64]) -> PassiveDynamics {
    PassiveDynamics::from_weights(DenseMatrix::from_row_major(n, n, w[..n * n].to_vec()).unwrap()).unwrap()
}

fn counts_from(n: usize, raw: &[u64]) -> TransitionCounts {
    let mut c = TransitionCounts::from_entries(n, (0..n * n).map(|k| (k / n, k % n, raw[k]))).unwrap();
    if c.total() == 0 {
        c.increment(0, 0);
    }
    c
}

fn central_difference<T: LogDensity>(target: &T, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut scratch = vec![0.0; x.len()];
    for k in 0..x.len() {
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[k] += h;
        dn[k] -= h;
        g[k] = (target.log_density_grad(&up, &mut scratch) - target.log_density_grad(&dn, &mut scratch)) / (2.0 * h);
    }
    g
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(1.0, f64::max);
    diff / scale
}

proptest! {
    #[test]
    fn likelihood_ignores_constant_shifts(
        n in 2usize..10,
        w in prop::collection::vec(0.01..1.0f64, 100),
        raw in prop::collection::vec(0u64..20, 100),
        v in prop::collection::vec(-10.0..10.0f64, 10),
        c in -100.0..100.0f64,
    ) {
        let model = IrlModel::new(counts_from(n, &raw), positive_passive(n, &w), identity_features(n).unwrap(), 1.0).unwrap();
        let v = &v[..n];
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert!((model.log_likelihood_v(v) - model.log_likelihood_v(&shifted)).abs() <= 1e-8);
    }

    #[test]
    fn posterior_gradient_matches_finite_differences(
        n in 2usize..10,
        w in prop::collection::vec(0.01..1.0f64, 100),
        raw in prop::collection::vec(0u64..5, 100),
        x in prop::collection::vec(-2.0..2.0f64, 11),
    ) {
        let model = IrlModel::new(counts_from(n, &raw), positive_passive(n, &w), identity_features(n).unwrap(), 1.0).unwrap();
        let x = &x[..n + 1];
        let mut g = vec![0.0; n + 1];
        model.log_density_grad(x, &mut g);
        prop_assert!(relative_error(&g, &central_difference(&model, x, 1e-5)) <= 1e-5);
    }
}

#[test]
fn gaussian_feature_gradients_match_finite_differences() {
    let grid = StateGrid::misalignment();
    let x = gaussian_basis_1d(&grid, 3, 10.0, Metric::Circular).unwrap();
    let uniform = PassiveDynamics::from_weights(DenseMatrix::from_row_major(36, 36, vec![1.0; 1296]).unwrap()).unwrap();
    let counts = TransitionCounts::from_entries(36, [(17, 17, 40), (17, 18, 9), (16, 17, 7), (3, 30, 1)]).unwrap();
    let model = IrlModel::new(counts, uniform, x, 1.0).unwrap();
    let mut r = stream(5, 0, 0);
    for _ in 0..5 {
        let p: Vec<f64> = (0..model.dim()).map(|_| lmdp_irl_core::rng::uniform(&mut r) * 2.0 - 1.0).collect();
        let mut g = vec![0.0; p.len()];
        model.log_density_grad(&p, &mut g);
        assert!(relative_error(&g, &central_difference(&model, &p, 1e-5)) <= 1e-5);
    }
}

/// Transitions drawn directly from `policy`, 20 chains started at each
/// state in turn.
fn sample_counts(policy: &ControlledPolicy, n_transitions: usize, seed: u64) -> TransitionCounts {
    let n = policy.len();
    let mut counts = TransitionCounts::zeros(n);
    let chains = 20;
    for c in 0..chains {
        let mut r = stream(seed, c as u64, 0);
        let mut s = c % n;
        for _ in 0..n_transitions / chains {
            let next = categorical(&mut r, policy.row(s));
            counts.increment(s, next);
            s = next;
        }
    }
    counts
}

#[test]
fn map_estimate_reproduces_generating_policy() {
    let n = 5;
    let mut r = stream(11, 0, 0);
    let w: Vec<f64> = (0..n * n).map(|_| 0.05 + lmdp_irl_core::rng::uniform(&mut r)).collect();
    let passive = positive_passive(n, &w);
    let v_true = vec![0.0, 1.5, 0.3, 2.0, 0.8];
    let problem = LmdpProblem::new(StateGrid::indexed(n).unwrap(), passive.clone(), 1.0, None).unwrap();
    let policy = optimal_policy(&problem, &CostToGo::new(v_true).unwrap()).unwrap();
    let counts = sample_counts(&policy, 100_000, 3);
    let visits = counts.row_totals();
    let model = IrlModel::new(counts, passive, identity_features(n).unwrap(), 1.0).unwrap();
    let map = find_map(&model, &vec![0.0; n + 1], &MapConfig::default()).unwrap();
    let beta = ParameterVector::from_flat(&map.x).beta;
    let fitted = optimal_policy(&problem, &CostToGo::new(model.cost_to_go(&beta)).unwrap()).unwrap();
    let mut checked = 0;
    for i in 0..n {
        if visits[i] >= 1000 {
            let tv: f64 = 0.5 * (0..n).map(|j| (fitted.get(i, j) - policy.get(i, j)).abs()).sum::<f64>();
            assert!(tv <= 0.02, "state {i}: tv {tv}");
            checked += 1;
        }
    }
    assert!(checked >= 3);
}

struct Quadratic {
    sd: Vec<f64>,
}

impl LogDensity for Quadratic {
    fn dim(&self) -> usize {
        self.sd.len()
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = 0.0;
        for i in 0..x.len() {
            lp -= 0.5 * (x[i] / self.sd[i]).powi(2);
            grad[i] = -x[i] / (self.sd[i] * self.sd[i]);
        }
        lp
    }
}

#[test]
fn nuts_marginal_variances_on_quadratic_target() {
    let target = Quadratic { sd: vec![1.0, 3.0, 0.2, 10.0] };
    let config = NutsConfig {
        n_warmup: 1000,
        n_samples: 4000,
        n_chains: 4,
        seed: 17,
        ..NutsConfig::default()
    };
    let chains: Vec<ChainResult> = (0..4).map(|c| run_chain(&target, &[0.0; 4], &config, c).unwrap()).collect();
    for d in 0..4 {
        let series: Vec<Vec<f64>> = chains.iter().map(|c| c.draws.iter().map(|x| x[d]).collect()).collect();
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        let ess = effective_sample_size(&refs);
        assert!(ess >= 10_000.0, "dim {d}: ess {ess}");
        let all: Vec<f64> = series.concat();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len() as f64 - 1.0);
        let truth = target.sd[d] * target.sd[d];
        assert!((var / truth - 1.0).abs() <= 0.10, "dim {d}: var {var} vs {truth}");
    }
}

#[test]
fn unvisited_states_stay_finite_and_uncertain() {
    let n = 12;
    let uniform = PassiveDynamics::from_weights(DenseMatrix::from_row_major(n, n, vec![1.0; n * n]).unwrap()).unwrap();
    let counts = TransitionCounts::from_entries(n, [(0, 0, 300), (0, 1, 150), (1, 0, 200), (1, 1, 100), (1, 2, 60)]).unwrap();
    let model = IrlModel::new(counts, uniform, identity_features(n).unwrap(), 1.0).unwrap();
    let sample = fit_variational(&model, &ParameterVector::zeros(n), &VariationalConfig::default()).unwrap();
    assert!(sample.draws.iter().all(ParameterVector::is_finite));
    let summary = summarize(&sample, model.features()).unwrap();
    assert!(summary.mean.iter().chain(&summary.lower95).chain(&summary.upper95).all(|x| x.is_finite()));
    let visited = summary.width(0).max(summary.width(1));
    for s in 3..n {
        assert!(summary.width(s) > visited, "state {s}");
    }
}
