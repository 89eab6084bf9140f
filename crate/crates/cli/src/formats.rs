//! CSV and JSON layouts shared by the subcommands.
//!
//! - Matrices: header `state_0..state_{J-1}`, one row per state.
//! - State vectors: either the same header with a single data row, or a
//!   long table whose first column is `state_index`.
//! - Counts: dense as a matrix, or sparse triplets `i,j,count`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use lmdp_irl_core::inference::{CostToGoSummary, PosteriorSample};
use lmdp_irl_core::spp::TransitionCounts;
use lmdp_irl_core::{DenseMatrix, StateGrid};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Counts tables with a smaller nonzero fraction are written sparse.
pub const SPARSE_DENSITY: f64 = 0.05;

/// Value columns accepted by long-format vector readers, in order of
/// preference.
pub const VALUE_COLUMNS: &[&str] = &["value", "mean", "cost", "ctg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountsLayout {
    Auto,
    Dense,
    Sparse,
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(pos) => CliError::input(path, format!("line {}: {e}", pos.line())),
        None => CliError::input(path, e.to_string()),
    }
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn state_header(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("state_{j}")).collect()
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(state_header(m.cols())).map_err(|e| csv_err(path, e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|&x| fmt_f64(x))).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

fn read_records(path: &Path) -> CliResult<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::input(path, format!("cannot open: {e}")),
            _ => csv_err(path, e),
        })?;
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_owned).collect();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| csv_err(path, e))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, line: usize, col: &str, s: &str) -> CliResult<f64> {
    s.parse::<f64>()
        .map_err(|_| CliError::input(path, format!("line {line}, column {col}: {s:?} is not a number")))
}

fn check_state_header(path: &Path, header: &[String]) -> CliResult<()> {
    for (j, h) in header.iter().enumerate() {
        if *h != format!("state_{j}") {
            return Err(CliError::input(path, format!("header column {} is {h:?}, expected \"state_{j}\"", j + 1)));
        }
    }
    if header.is_empty() {
        return Err(CliError::input(path, "empty header"));
    }
    Ok(())
}

pub fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    let (header, rows) = read_records(path)?;
    check_state_header(path, &header)?;
    let n = header.len();
    let mut data = Vec::with_capacity(rows.len() * n);
    for (k, rec) in rows.iter().enumerate() {
        for (j, s) in rec.iter().enumerate() {
            data.push(parse_f64(path, k + 2, &header[j], s)?);
        }
    }
    DenseMatrix::from_row_major(rows.len(), n, data).map_err(|e| CliError::input(path, e.to_string()))
}

/// Dense vector: state header plus one data row.
pub fn write_vector(path: &Path, values: &[f64]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(state_header(values.len())).map_err(|e| csv_err(path, e))?;
    w.write_record(values.iter().map(|&x| fmt_f64(x))).map_err(|e| csv_err(path, e))?;
    finish(path, w)
}

/// Reads a state vector from either layout. For long tables the value is
/// taken from the first of `columns` present.
pub fn read_vector(path: &Path, columns: &[&str]) -> CliResult<Vec<f64>> {
    let (header, rows) = read_records(path)?;
    if header.first().map(String::as_str) == Some("state_index") {
        let col = columns
            .iter()
            .find_map(|c| header.iter().position(|h| h == c))
            .ok_or_else(|| CliError::input(path, format!("no column among {columns:?}")))?;
        let mut out = vec![f64::NAN; rows.len()];
        for (k, rec) in rows.iter().enumerate() {
            let line = k + 2;
            let idx: usize = rec[0]
                .parse()
                .map_err(|_| CliError::input(path, format!("line {line}: bad state_index {:?}", &rec[0])))?;
            if idx >= rows.len() || !out[idx].is_nan() {
                return Err(CliError::input(path, format!("line {line}: state_index {idx} is out of range or repeated")));
            }
            out[idx] = parse_f64(path, line, &header[col], &rec[col])?;
        }
        return Ok(out);
    }
    check_state_header(path, &header)?;
    match rows.as_slice() {
        [rec] => rec
            .iter()
            .enumerate()
            .map(|(j, s)| parse_f64(path, 2, &header[j], s))
            .collect(),
        _ => Err(CliError::input(path, format!("expected one data row, found {}", rows.len()))),
    }
}

pub fn write_counts(path: &Path, counts: &TransitionCounts, layout: CountsLayout) -> CliResult<()> {
    let sparse = match layout {
        CountsLayout::Auto => counts.density() < SPARSE_DENSITY,
        CountsLayout::Dense => false,
        CountsLayout::Sparse => true,
    };
    let mut w = csv_writer(path)?;
    if sparse {
        w.write_record(["i", "j", "count"]).map_err(|e| csv_err(path, e))?;
        for (i, j, c) in counts.nonzero() {
            w.write_record([i.to_string(), j.to_string(), c.to_string()]).map_err(|e| csv_err(path, e))?;
        }
    } else {
        let n = counts.len();
        w.write_record(state_header(n)).map_err(|e| csv_err(path, e))?;
        for i in 0..n {
            w.write_record(counts.row(i).iter().map(u64::to_string)).map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

/// Reads either counts layout. Sparse tables need `n_states` when the
/// highest state index does not reveal it.
pub fn read_counts(path: &Path, n_states: Option<usize>) -> CliResult<TransitionCounts> {
    let (header, rows) = read_records(path)?;
    let parse_u64 = |line: usize, col: &str, s: &str| {
        s.parse::<u64>()
            .map_err(|_| CliError::input(path, format!("line {line}, column {col}: {s:?} is not a nonnegative integer")))
    };
    if header == ["i", "j", "count"] {
        let mut entries = Vec::with_capacity(rows.len());
        let mut max_state = 0;
        for (k, rec) in rows.iter().enumerate() {
            let line = k + 2;
            let i = parse_u64(line, "i", &rec[0])? as usize;
            let j = parse_u64(line, "j", &rec[1])? as usize;
            let c = parse_u64(line, "count", &rec[2])?;
            max_state = max_state.max(i).max(j);
            entries.push((i, j, c));
        }
        let n = n_states.unwrap_or(max_state + 1);
        if max_state >= n {
            return Err(CliError::input(path, format!("state {max_state} exceeds the {n}-state space")));
        }
        return TransitionCounts::from_entries(n, entries).map_err(|e| CliError::input(path, e.to_string()));
    }
    check_state_header(path, &header)?;
    let n = header.len();
    if rows.len() != n {
        return Err(CliError::input(path, format!("dense counts need {n} rows, found {}", rows.len())));
    }
    let mut entries = Vec::new();
    for (i, rec) in rows.iter().enumerate() {
        for (j, s) in rec.iter().enumerate() {
            let c = parse_u64(i + 2, &header[j], s)?;
            if c > 0 {
                entries.push((i, j, c));
            }
        }
    }
    TransitionCounts::from_entries(n, entries).map_err(|e| CliError::input(path, e.to_string()))
}

fn center_header(grid: &StateGrid) -> Vec<&'static str> {
    if grid.dims() == 2 {
        vec!["center_local", "center_target"]
    } else {
        vec!["center"]
    }
}

fn centers(grid: &StateGrid, s: usize) -> Vec<String> {
    (0..grid.dims()).map(|d| fmt_f64(grid.center(s, d))).collect()
}

/// Long table `state_index, center(s), <name>`.
pub fn write_state_table(path: &Path, grid: &StateGrid, name: &str, values: &[f64]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["state_index"];
    header.extend(center_header(grid));
    header.push(name);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (s, v) in values.iter().enumerate() {
        let mut rec = vec![s.to_string()];
        rec.extend(centers(grid, s));
        rec.push(fmt_f64(*v));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_summary(path: &Path, grid: &StateGrid, summary: &CostToGoSummary) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["state_index"];
    header.extend(center_header(grid));
    header.extend(["mean", "lower95", "upper95"]);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for s in 0..summary.len() {
        let mut rec = vec![s.to_string()];
        rec.extend(centers(grid, s));
        rec.extend([summary.mean[s], summary.lower95[s], summary.upper95[s]].map(fmt_f64));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads `mean, lower95, upper95` from a summary table.
pub fn read_summary(path: &Path) -> CliResult<CostToGoSummary> {
    let mean = read_vector(path, &["mean"])?;
    let lower95 = read_vector(path, &["lower95"])?;
    let upper95 = read_vector(path, &["upper95"])?;
    Ok(CostToGoSummary {
        mean,
        lower95,
        upper95,
        shift: 0.0,
    })
}

pub fn write_draws(path: &Path, sample: &PosteriorSample) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let nb = sample.draws.first().map_or(0, |d| d.beta.len());
    let mut header = vec!["draw".to_string(), "chain".to_string()];
    header.extend((0..nb).map(|k| format!("beta_{k}")));
    header.push("log_tau".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, (d, c)) in sample.draws.iter().zip(&sample.chain).enumerate() {
        let mut rec = vec![k.to_string(), c.to_string()];
        rec.extend(d.beta.iter().map(|&b| fmt_f64(b)));
        rec.push(fmt_f64(d.log_tau));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Writes any serializable rows with a header taken from field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, format!("cannot open: {e}")))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| csv_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, format!("cannot open: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))
}

pub fn write_scalar(path: &Path, x: f64) -> CliResult<()> {
    std::fs::write(path, format!("{}\n", fmt_f64(x))).map_err(|e| CliError::io(path, e))
}

pub fn read_scalar(path: &Path) -> CliResult<f64> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, format!("cannot open: {e}")))?;
    text.trim()
        .parse()
        .map_err(|_| CliError::input(path, format!("{:?} is not a number", text.trim())))
}
