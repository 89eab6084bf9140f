use lmdp_irl_core::lmdp::{optimal_policy, z_iteration, LmdpProblem, DEFAULT_Z_MAX_ITER, DEFAULT_Z_TOL};
use lmdp_irl_core::spp::{simulate, spp_passive_dynamics, spp_state_costs, SppConfig};
use lmdp_irl_core::StateGrid;
use serde::Serialize;

use super::RunInfo;
use crate::cli::SimulateArgs;
use crate::error::{CliResult, CoreContext};
use crate::formats::{self, CountsLayout};

#[derive(Serialize)]
struct TrajectoryRow {
    agent_id: usize,
    t: usize,
    x: f64,
    y: f64,
    theta: f64,
    state_index: usize,
}

pub fn config_from_args(args: &SimulateArgs) -> SppConfig {
    SppConfig {
        n_agents: args.agents,
        n_steps: args.steps,
        speed: args.speed,
        radius_rho: args.rho,
        sigma_deg: args.sigma,
        seed: args.seed,
        recording: args.recording.into(),
        ..SppConfig::default()
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<RunInfo> {
    let config = config_from_args(args);
    config.validate().context("simulate-spp flags")?;
    let grid = StateGrid::misalignment();
    let passive = spp_passive_dynamics(&grid, &config).context("SPP passive dynamics")?;
    let costs = spp_state_costs(&grid);
    let solution = z_iteration(&passive, &costs, DEFAULT_Z_TOL, DEFAULT_Z_MAX_ITER).context("Z-iteration")?;
    log::info!("Z-iteration converged in {} sweeps, lambda = {}", solution.iterations, solution.lambda);
    let problem = LmdpProblem::new(grid.clone(), passive.clone(), 1.0, Some(costs.clone())).context("SPP problem")?;
    let policy = optimal_policy(&problem, &solution.cost_to_go).context("optimal policy")?;
    let out = simulate(&config, &policy, &grid).context("simulation")?;
    log::info!("recorded {} transitions", out.counts.total());

    let dir = &args.out_dir;
    let rows = out.trajectories.iter().flat_map(|traj| {
        let path = &out.paths[traj.agent_id];
        traj.states.iter().map(move |&(t, s)| TrajectoryRow {
            agent_id: traj.agent_id,
            t,
            x: path[t].x,
            y: path[t].y,
            theta: path[t].theta,
            state_index: s,
        })
    });
    formats::write_rows(&dir.join("trajectories.csv"), rows)?;
    formats::write_counts(&dir.join("counts.csv"), &out.counts, CountsLayout::Dense)?;
    formats::write_json(&dir.join("config.json"), &config)?;
    formats::write_matrix(&dir.join("passive.csv"), passive.matrix())?;
    formats::write_vector(&dir.join("costs.csv"), costs.values())?;
    formats::write_vector(&dir.join("ctg.csv"), solution.cost_to_go.values())?;
    formats::write_scalar(&dir.join("lambda.txt"), solution.lambda)?;
    Ok(RunInfo {
        inputs: Vec::new(),
        seed: Some(args.seed),
    })
}
