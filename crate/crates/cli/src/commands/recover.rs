use std::path::PathBuf;

use lmdp_irl_core::lmdp::{bellman_residual, recover_state_costs, CostToGo, LmdpProblem};
use serde::Serialize;

use super::{infer_grid, PassiveChoice, RunInfo};
use crate::cli::RecoverArgs;
use crate::error::{CliError, CliResult, CoreContext};
use crate::formats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    Flag,
    File,
    /// `log λ = min_i (v_i + log Σ_j p̄_ij exp(-v_j))`, so that `min r = 0`.
    AnchoredMinZero,
}

#[derive(Serialize)]
struct RecoverFile {
    lambda: f64,
    lambda_source: LambdaSource,
    bellman_residual: f64,
}

fn lambda_arg(arg: &str) -> CliResult<(f64, LambdaSource, Option<PathBuf>)> {
    if let Ok(x) = arg.parse::<f64>() {
        return Ok((x, LambdaSource::Flag, None));
    }
    let path = PathBuf::from(arg);
    if !path.is_file() {
        return Err(CliError::Usage(format!("--lambda {arg:?} is neither a number nor a file")));
    }
    Ok((formats::read_scalar(&path)?, LambdaSource::File, Some(path)))
}

pub fn run(args: &RecoverArgs) -> CliResult<RunInfo> {
    let passive_choice = PassiveChoice::parse(&args.passive)?;
    let v = CostToGo::new(formats::read_vector(&args.ctg, formats::VALUE_COLUMNS)?)
        .map_err(|e| CliError::input(&args.ctg, e.to_string()))?;
    let grid = infer_grid(v.len(), args.bins)?;
    let passive = passive_choice.build(&grid)?;
    if passive.len() != v.len() {
        return Err(CliError::input(
            &args.ctg,
            format!("{} values for a {}-state passive matrix", v.len(), passive.len()),
        ));
    }
    let mut inputs = vec![args.ctg.clone()];
    inputs.extend(passive_choice.file().map(Into::into));

    let (lambda, source, costs) = match &args.lambda {
        Some(arg) => {
            let (lambda, source, file) = lambda_arg(arg)?;
            inputs.extend(file);
            let costs = recover_state_costs(&v, &passive, lambda).context("--lambda")?;
            (lambda, source, costs)
        }
        None => {
            // With λ = 1 the costs are off by exactly log λ; remove their minimum.
            let raw = recover_state_costs(&v, &passive, 1.0).context("cost recovery")?;
            let log_lambda = raw.values().iter().copied().fold(f64::INFINITY, f64::min);
            let lambda = log_lambda.exp();
            let costs = recover_state_costs(&v, &passive, lambda).context("cost recovery")?;
            (lambda, LambdaSource::AnchoredMinZero, costs)
        }
    };
    let problem = LmdpProblem::new(grid.clone(), passive, 1.0, Some(costs.clone())).context("problem")?;
    let residual = bellman_residual(&problem, &v, lambda).context("Bellman residual")?;
    log::info!("lambda = {lambda} ({source:?}), Bellman residual {residual:e}");

    let dir = &args.out_dir;
    formats::write_vector(&dir.join("recovered_costs.csv"), costs.values())?;
    formats::write_json(
        &dir.join("recover.json"),
        &RecoverFile {
            lambda,
            lambda_source: source,
            bellman_residual: residual,
        },
    )?;
    Ok(RunInfo { inputs, seed: None })
}
