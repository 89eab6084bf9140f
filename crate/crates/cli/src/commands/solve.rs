use lmdp_irl_core::lmdp::{optimal_policy, shift_min_zero, z_iteration, CostVector, LmdpProblem, PassiveDynamics};
use lmdp_irl_core::StateGrid;

use super::RunInfo;
use crate::cli::SolveArgs;
use crate::error::{CliError, CliResult, CoreContext};
use crate::formats;

pub fn run(args: &SolveArgs) -> CliResult<RunInfo> {
    let passive = PassiveDynamics::new(formats::read_matrix(&args.passive)?)
        .map_err(|e| CliError::input(&args.passive, e.to_string()))?;
    let costs = CostVector::new(formats::read_vector(&args.costs, formats::VALUE_COLUMNS)?)
        .map_err(|e| CliError::input(&args.costs, e.to_string()))?;
    if costs.len() != passive.len() {
        return Err(CliError::input(
            &args.costs,
            format!("{} costs for a {}-state passive matrix", costs.len(), passive.len()),
        ));
    }
    let solution = z_iteration(&passive, &costs, args.tol, args.max_iter).context("Z-iteration")?;
    log::info!("converged in {} sweeps, lambda = {}", solution.iterations, solution.lambda);
    let v = shift_min_zero(&solution.cost_to_go);
    let grid = StateGrid::indexed(passive.len()).context("state grid")?;
    let problem = LmdpProblem::new(grid, passive, 1.0, Some(costs)).context("problem")?;
    let policy = optimal_policy(&problem, &v).context("optimal policy")?;

    let dir = &args.out_dir;
    formats::write_vector(&dir.join("ctg.csv"), v.values())?;
    formats::write_scalar(&dir.join("lambda.txt"), solution.lambda)?;
    formats::write_matrix(&dir.join("policy.csv"), policy.matrix())?;
    Ok(RunInfo {
        inputs: vec![args.passive.clone(), args.costs.clone()],
        seed: None,
    })
}
