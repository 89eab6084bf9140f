use lmdp_irl_core::trajectory::{marginal_ctg, Dimension};
use lmdp_irl_core::StateGrid;
use serde::Serialize;

use super::RunInfo;
use crate::cli::MarginalsArgs;
use crate::error::{CliError, CliResult};
use crate::formats;

#[derive(Serialize)]
struct MarginalRow {
    bin: usize,
    center_deg: f64,
    ctg: f64,
}

pub fn run(args: &MarginalsArgs) -> CliResult<RunInfo> {
    let summary = formats::read_summary(&args.summary)?;
    if summary.len() != args.bins * args.bins {
        return Err(CliError::input(
            &args.summary,
            format!("{} states is not --bins {} squared", summary.len(), args.bins),
        ));
    }
    let grid = StateGrid::misalignment_2d(args.bins).map_err(|e| CliError::Usage(format!("--bins: {e}")))?;
    for (dimension, file) in [(Dimension::Local, "marginal_local.csv"), (Dimension::Target, "marginal_target.csv")] {
        let values = marginal_ctg(&summary, &grid, dimension).map_err(|e| CliError::input(&args.summary, e.to_string()))?;
        let axis = grid.axis(match dimension {
            Dimension::Local => 0,
            Dimension::Target => 1,
        });
        formats::write_rows(
            &args.out_dir.join(file),
            values.iter().enumerate().map(|(bin, &ctg)| MarginalRow {
                bin,
                center_deg: axis.center(bin),
                ctg,
            }),
        )?;
    }
    Ok(RunInfo {
        inputs: vec![args.summary.clone()],
        seed: None,
    })
}
