use lmdp_irl_core::trajectory::{derive_states, ingest_rows, ArenaBounds, ExperimentConfig, RawRow};
use serde::{Deserialize, Serialize};

use super::RunInfo;
use crate::cli::IngestArgs;
use crate::error::{CliError, CliResult};
use crate::formats::{self, CountsLayout};

/// `arena.json`: bounds and target point in raw CSV units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaFile {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub target: (f64, f64),
}

#[derive(Serialize)]
struct StateRow<'a> {
    experiment_id: &'a str,
    agent_id: &'a str,
    t: i64,
    local_deg: f64,
    target_deg: f64,
    state_index: usize,
}

fn experiment_config(args: &IngestArgs) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig {
        n_bins_per_dim: args.bins,
        include_self: args.self_include,
        ..ExperimentConfig::default()
    };
    if let Some(path) = &args.arena {
        let arena: ArenaFile = formats::read_json(path)?;
        let bounds = ArenaBounds {
            x_min: arena.x_min,
            y_min: arena.y_min,
            x_max: arena.x_max,
            y_max: arena.y_max,
        };
        let (tx, ty) = arena.target;
        config.arena_bounds = bounds;
        config.target_point = (
            (tx - bounds.x_min) / (bounds.x_max - bounds.x_min),
            (ty - bounds.y_min) / (bounds.y_max - bounds.y_min),
        );
        config.validate().map_err(|e| CliError::input(path, e.to_string()))?;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(format!("--bins {}: {e}", args.bins)))?;
    Ok(config)
}

pub fn run(args: &IngestArgs) -> CliResult<RunInfo> {
    let config = experiment_config(args)?;
    let rows: Vec<RawRow> = formats::read_rows(&args.csv)?;
    let (table, report) = ingest_rows(rows, &config).map_err(|e| CliError::input(&args.csv, e.to_string()))?;
    if !report.out_of_bounds_rows.is_empty() {
        log::warn!("{} rows fall outside the arena", report.out_of_bounds_rows.len());
    }
    let derived = derive_states(&table, &config).map_err(|e| CliError::input(&args.csv, e.to_string()))?;
    let counts = derived.counts();
    log::info!(
        "{} series, {} frames, {} transitions",
        report.series,
        derived.records.len(),
        counts.total()
    );

    let dir = &args.out_dir;
    formats::write_counts(&dir.join("counts.csv"), &counts, CountsLayout::Auto)?;
    formats::write_rows(
        &dir.join("states.csv"),
        derived.records.iter().map(|r| StateRow {
            experiment_id: &r.experiment_id,
            agent_id: &r.agent_id,
            t: r.t,
            local_deg: r.local_deg,
            target_deg: r.target_deg,
            state_index: r.state,
        }),
    )?;
    formats::write_json(&dir.join("validation.json"), &report)?;
    let mut inputs = vec![args.csv.clone()];
    inputs.extend(args.arena.clone());
    Ok(RunInfo { inputs, seed: None })
}
