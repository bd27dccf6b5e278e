//! Text serialization: time-series CSV, field snapshots, sweep tables and
//! ODE trajectories. Numbers are written in shortest round-trip decimal, so
//! reading a file back reproduces every value bitwise.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::diagnostics::{Classification, DiagnosticsRecord};
use crate::grid::{Field, GridSpec};
use crate::model::OdeTrajectory;
use crate::stepper::SimState;
use crate::sweep::{estimate_threshold, NoBracket, SweepResult};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err(line: usize, message: impl Into<String>) -> OutputError {
    OutputError::Format {
        line,
        message: message.into(),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    std::fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String, OutputError> {
    std::fs::read_to_string(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest decimal that parses back to the same `f64`. Plain notation in
/// the usual range, exponent notation for very small or large magnitudes.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64, OutputError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format_err(line, format!("not a number: '{s}'")))
}

pub const TIMESERIES_COLUMNS: [&str; 13] = [
    "t",
    "dt",
    "mass_u",
    "mass_v",
    "min_u",
    "sup_u",
    "min_v",
    "sup_v",
    "min_w",
    "sup_w",
    "sup_grad_v",
    "lemma22_violation",
    "repr_residual",
];

fn timeseries_header(p_values: &[f64]) -> String {
    let mut cols: Vec<String> = TIMESERIES_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend(p_values.iter().map(|p| format!("Lp_u_{}", format_f64(*p))));
    cols.join(",")
}

/// CSV text for `records`; `p_values` fixes the trailing `Lp_u_<p>` columns.
pub fn timeseries_to_string(records: &[DiagnosticsRecord], p_values: &[f64]) -> String {
    let mut out = timeseries_header(p_values);
    out.push('\n');
    for r in records {
        let fixed = [
            r.t,
            r.dt_used,
            r.mass_u,
            r.mass_v,
            r.min_u,
            r.sup_u,
            r.min_v,
            r.sup_v,
            r.min_w,
            r.sup_w,
            r.sup_grad_v,
            r.lemma22_max_violation,
            r.repr_residual,
        ];
        let mut cells: Vec<String> = fixed.iter().map(|x| format_f64(*x)).collect();
        for p in p_values {
            let value = r
                .lp_u
                .iter()
                .find(|(q, _)| q == p)
                .map_or(f64::NAN, |(_, v)| *v);
            cells.push(format_f64(value));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_timeseries(path: &Path, records: &[DiagnosticsRecord], p_values: &[f64]) -> Result<(), OutputError> {
    write_file(path, &timeseries_to_string(records, p_values))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timeseries {
    pub p_values: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
}

pub fn parse_timeseries(text: &str) -> Result<Timeseries, OutputError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < TIMESERIES_COLUMNS.len() || cols[..TIMESERIES_COLUMNS.len()] != TIMESERIES_COLUMNS {
        return Err(format_err(1, "unexpected time-series header"));
    }
    let p_values = cols[TIMESERIES_COLUMNS.len()..]
        .iter()
        .map(|c| {
            c.strip_prefix("Lp_u_")
                .and_then(|p| p.parse::<f64>().ok())
                .ok_or_else(|| format_err(1, format!("unexpected column '{c}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        let n = idx + 1;
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| parse_num(s, n))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != cols.len() {
            return Err(format_err(n, format!("expected {} fields, got {}", cols.len(), vals.len())));
        }
        records.push(DiagnosticsRecord {
            t: vals[0],
            dt_used: vals[1],
            mass_u: vals[2],
            mass_v: vals[3],
            min_u: vals[4],
            sup_u: vals[5],
            min_v: vals[6],
            sup_v: vals[7],
            min_w: vals[8],
            sup_w: vals[9],
            sup_grad_v: vals[10],
            lemma22_max_violation: vals[11],
            repr_residual: vals[12],
            lp_u: p_values
                .iter()
                .copied()
                .zip(vals[TIMESERIES_COLUMNS.len()..].iter().copied())
                .collect(),
        });
    }
    Ok(Timeseries { p_values, records })
}

pub fn read_timeseries(path: &Path) -> Result<Timeseries, OutputError> {
    parse_timeseries(&read_file(path)?)
}

/// Fields as read back from a snapshot file.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotData {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
}

pub fn snapshot_to_string(t: f64, u: &Field, v: &Field, w: &Field) -> String {
    let g = u.grid();
    let join = |xs: Vec<String>| xs.join(" ");
    let mut out = String::new();
    let _ = writeln!(out, "dim {}", g.dim());
    let _ = writeln!(out, "cells {}", join(g.cells().iter().map(|c| c.to_string()).collect()));
    let _ = writeln!(out, "extent {}", join(g.extent().iter().map(|x| format_f64(*x)).collect()));
    let _ = writeln!(out, "t {}", format_f64(t));
    for ((a, b), c) in u.values().iter().zip(v.values()).zip(w.values()) {
        let _ = writeln!(out, "{} {} {}", format_f64(*a), format_f64(*b), format_f64(*c));
    }
    out
}

pub fn write_snapshot(state: &SimState, path: &Path) -> Result<(), OutputError> {
    write_file(path, &snapshot_to_string(state.t, &state.u, &state.v, &state.w))
}

pub fn parse_snapshot(text: &str) -> Result<SnapshotData, OutputError> {
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<Vec<String>, OutputError> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| format_err(0, format!("missing '{key}' header")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(format_err(idx + 1, format!("expected '{key}' header")));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let dim_line = header("dim")?;
    let cells_line = header("cells")?;
    let extent_line = header("extent")?;
    let t_line = header("t")?;
    let dim: usize = dim_line
        .first()
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| format_err(1, "bad dim"))?;
    let cells = cells_line
        .iter()
        .map(|c| c.parse::<usize>().map_err(|_| format_err(2, "bad cell count")))
        .collect::<Result<Vec<_>, _>>()?;
    let extent = extent_line
        .iter()
        .map(|x| parse_num(x, 3))
        .collect::<Result<Vec<_>, _>>()?;
    let t = parse_num(t_line.first().map_or("", String::as_str), 4)?;
    if cells.len() != dim {
        return Err(format_err(2, format!("expected {dim} cell counts")));
    }
    let grid = Arc::new(GridSpec::new(&extent, &cells).map_err(|e| format_err(3, e.to_string()))?);
    let n = grid.len();
    let mut cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut count = 0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 {
            return Err(format_err(idx + 1, "expected 'u v w'"));
        }
        for (col, s) in cols.iter_mut().zip(vals) {
            col.push(parse_num(s, idx + 1)?);
        }
        count += 1;
    }
    if count != n {
        return Err(format_err(
            0,
            format!("header declares {n} cells but {count} data lines follow"),
        ));
    }
    let [u, v, w] = cols;
    let field = |vals| Field::from_values(&grid, vals).map_err(|e| format_err(0, e.to_string()));
    Ok(SnapshotData {
        t,
        u: field(u)?,
        v: field(v)?,
        w: field(w)?,
    })
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData, OutputError> {
    parse_snapshot(&read_file(path)?)
}

pub const SWEEP_COLUMNS: &str =
    "theta,chi,mu,repetition,verdict,max_sup_u,t_of_max,crossing_time,termination,pe_condition";

/// One row per (θ, repetition). Wall-clock time is left out so repeated
/// sweeps produce identical files.
pub fn sweep_table_to_string(results: &[SweepResult]) -> String {
    let mut out = String::from(SWEEP_COLUMNS);
    out.push('\n');
    for r in results {
        let crossing = r.verdict.crossing_time.map(format_f64).unwrap_or_default();
        let pe = r.pe_condition.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            format_f64(r.theta),
            format_f64(r.chi),
            format_f64(r.mu),
            r.repetition,
            r.verdict.classification.as_str(),
            format_f64(r.max_sup_u),
            format_f64(r.verdict.t_of_max),
            crossing,
            r.termination,
            pe,
        );
    }
    out
}

pub fn sweep_summary(results: &[SweepResult]) -> String {
    let mut out = String::new();
    let count = |c: Classification| {
        results
            .iter()
            .filter(|r| r.verdict.classification == c)
            .count()
    };
    let _ = writeln!(out, "runs = {}", results.len());
    for c in [
        Classification::Bounded,
        Classification::Growing,
        Classification::BlewUp,
        Classification::Inconclusive,
    ] {
        let _ = writeln!(out, "{} = {}", c.as_str(), count(c));
    }
    match estimate_threshold(results) {
        Ok((lo, hi)) => {
            let _ = writeln!(out, "bracket = {}, {}", format_f64(lo), format_f64(hi));
        }
        Err(e) => {
            let why = match e {
                NoBracket::Empty => "empty",
                NoBracket::AllBounded => "all_bounded",
                NoBracket::NoneBounded => "none_bounded",
                NoBracket::NonMonotone => "non_monotone",
            };
            let _ = writeln!(out, "bracket = none ({why})");
        }
    }
    let mut pe: Vec<String> = results
        .iter()
        .filter_map(|r| r.pe_condition.map(|b| format!("{}:{}", format_f64(r.theta), b)))
        .collect();
    pe.dedup();
    if !pe.is_empty() {
        let _ = writeln!(out, "pe_condition = {}", pe.join(" "));
    }
    out
}

pub fn ode_to_string(traj: &OdeTrajectory) -> String {
    let mut out = String::from("t,u,v,w\n");
    for (t, y) in &traj.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_f64(*t),
            format_f64(y[0]),
            format_f64(y[1]),
            format_f64(y[2])
        );
    }
    out
}
