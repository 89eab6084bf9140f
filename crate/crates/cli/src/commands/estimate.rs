use std::time::Instant;

use lmdp_irl_core::inference::{
    combine_chains, fit_variational, run_chain, summarize, IrlModel, NutsConfig, ParameterVector, PosteriorSample,
    VariationalConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use super::{infer_grid, FeatureChoice, PassiveChoice, RunInfo};
use crate::cli::{EstimateArgs, MethodArg};
use crate::error::{CliError, CliResult, CoreContext};
use crate::formats;

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    n_states: usize,
    n_basis: usize,
    n_transitions: u64,
    passive: &'a str,
    features: &'a str,
    #[serde(flatten)]
    diagnostics: &'a lmdp_irl_core::inference::Diagnostics,
    runtime_seconds: f64,
}

fn sample(model: &IrlModel, args: &EstimateArgs) -> CliResult<PosteriorSample> {
    let init = ParameterVector::zeros(model.n_basis());
    match args.method {
        MethodArg::Mcmc => {
            let config = NutsConfig {
                n_warmup: args.warmup,
                n_samples: args.samples,
                n_chains: args.chains,
                seed: args.seed,
                ..NutsConfig::default()
            };
            config.validate().context("sampler flags")?;
            let flat = init.to_flat();
            // Each chain owns its random stream, so results do not depend on
            // scheduling.
            let chains = (0..config.n_chains)
                .into_par_iter()
                .map(|c| run_chain(model, &flat, &config, c))
                .collect::<Result<Vec<_>, _>>()
                .context("NUTS")?;
            combine_chains(chains, &config).context("NUTS")
        }
        MethodArg::Vi => {
            let config = VariationalConfig {
                max_iter: args.vi_iter,
                n_draws: args.draws,
                seed: args.seed,
                ..VariationalConfig::default()
            };
            config.validate().context("variational flags")?;
            fit_variational(model, &init, &config).context("variational fit")
        }
    }
}

pub fn run(args: &EstimateArgs) -> CliResult<RunInfo> {
    let passive_choice = PassiveChoice::parse(&args.passive)?;
    let feature_choice = FeatureChoice::parse(&args.features)?;
    let hint = match (args.states, passive_choice.file()) {
        (Some(n), _) => n,
        (None, Some(path)) => formats::read_matrix(path)?.rows(),
        (None, None) => args.bins * args.bins,
    };
    let counts = formats::read_counts(&args.counts, Some(hint))?;
    let grid = infer_grid(counts.len(), args.bins)?;
    let passive = passive_choice.build(&grid)?;
    let features = feature_choice.build(&grid)?;
    log::info!(
        "{} states, {} basis functions, {} transitions",
        grid.count(),
        features.n_basis(),
        counts.total()
    );
    let n_transitions = counts.total();
    let model = IrlModel::new(counts, passive, features, args.gamma).map_err(|e| match e {
        lmdp_irl_core::Error::InvalidParameter { .. } => CliError::Usage(format!("--gamma: {e}")),
        _ => CliError::input(&args.counts, e.to_string()),
    })?;

    let start = Instant::now();
    let posterior = sample(&model, args)?;
    let runtime = start.elapsed().as_secs_f64();
    log::info!("{:?} finished in {runtime:.2} s", args.method);
    let summary = summarize(&posterior, model.features()).context("posterior summary")?;

    let dir = &args.out_dir;
    formats::write_draws(&dir.join("posterior_draws.csv"), &posterior)?;
    formats::write_summary(&dir.join("ctg_summary.csv"), &grid, &summary)?;
    formats::write_json(
        &dir.join("diagnostics.json"),
        &DiagnosticsFile {
            n_states: grid.count(),
            n_basis: model.n_basis(),
            n_transitions,
            passive: &args.passive,
            features: &args.features,
            diagnostics: &posterior.diagnostics,
            runtime_seconds: runtime,
        },
    )?;
    formats::write_json(&dir.join("features.json"), model.features().metadata())?;
    if args.write_features {
        formats::write_matrix(&dir.join("features.csv"), model.features().values())?;
    }
    let mut inputs = vec![args.counts.clone()];
    inputs.extend(passive_choice.file().map(Into::into));
    Ok(RunInfo {
        inputs,
        seed: Some(args.seed),
    })
}
