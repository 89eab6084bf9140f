//! File-based workflow around `lmdp-irl-core`: simulate, solve forward,
//! ingest, estimate, recover costs, marginalize.

pub mod cli;
pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;

use crate::cli::{Cli, Command, LogLevel};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const THREADS_ENV: &str = "LMDP_IRL_THREADS";

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.log);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: LogLevel) {
    let filter = match level {
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// `--threads`, else the environment variable, else all cores.
fn thread_cap(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_ENV}={s:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let threads = thread_cap(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    let name = cli.command.name();
    let (out_dir, flags) = match &cli.command {
        Command::SimulateSpp(a) => (a.out_dir.clone(), serde_json::to_value(a)),
        Command::SolveForward(a) => (a.out_dir.clone(), serde_json::to_value(a)),
        Command::Ingest(a) => (a.out_dir.clone(), serde_json::to_value(a)),
        Command::Estimate(a) => (a.out_dir.clone(), serde_json::to_value(a)),
        Command::RecoverCosts(a) => (a.out_dir.clone(), serde_json::to_value(a)),
        Command::Marginals(a) => (a.out_dir.clone(), serde_json::to_value(a)),
    };
    let mut flags = flags.map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(map) = flags.as_object_mut() {
        map.insert("threads".into(), threads.into());
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    log::info!("{name}: writing to {} with {threads} threads", out_dir.display());

    let start = Instant::now();
    let info = pool.install(|| match &cli.command {
        Command::SimulateSpp(a) => commands::simulate::run(a),
        Command::SolveForward(a) => commands::solve::run(a),
        Command::Ingest(a) => commands::ingest::run(a),
        Command::Estimate(a) => commands::estimate::run(a),
        Command::RecoverCosts(a) => commands::recover::run(a),
        Command::Marginals(a) => commands::marginals::run(a),
    })?;
    let runtime = start.elapsed().as_secs_f64();
    RunManifest::new(name, flags, &info.inputs, info.seed, runtime)?.write(&out_dir)?;
    log::info!("{name}: done in {runtime:.2} s");
    Ok(())
}
