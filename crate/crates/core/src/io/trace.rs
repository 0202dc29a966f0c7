use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::central::FlowTrace;
use crate::dhiso::DistTrace;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "t,f_gap,cons_x,cons_z,sum_z,sum_v,max_opt_err,max_field_norm";
pub const MAX_TRACE_ROWS: usize = 10_000;

/// One CSV row. Centralized runs have no consensus terms: `cons_x`,
/// `cons_z` and `sum_v` are zero and `sum_z` is `‖Σ g(x)‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub f_gap: f64,
    pub cons_x: f64,
    pub cons_z: f64,
    pub sum_z: f64,
    pub sum_v: f64,
    pub max_opt_err: f64,
    pub max_field_norm: f64,
}

pub fn rows_from_flow(trace: &FlowTrace, x_star: &DVector<f64>) -> Vec<TraceRow> {
    trace
        .samples
        .iter()
        .map(|s| TraceRow {
            t: s.t,
            f_gap: s.f_gap,
            cons_x: 0.0,
            cons_z: 0.0,
            sum_z: s.field_norm / trace.field.gain(),
            sum_v: 0.0,
            max_opt_err: (&s.x - x_star).norm(),
            max_field_norm: s.field_norm,
        })
        .collect()
}

pub fn rows_from_dist(trace: &DistTrace) -> Vec<TraceRow> {
    trace
        .samples
        .iter()
        .map(|s| TraceRow {
            t: s.t,
            f_gap: s.f_gap,
            cons_x: s.diag.cons_x,
            cons_z: s.diag.cons_z,
            sum_z: s.diag.sum_z,
            sum_v: s.diag.sum_v,
            max_opt_err: s.max_opt_err,
            max_field_norm: s.max_field_norm,
        })
        .collect()
}

/// Keeps every k-th row plus the last so at most [`MAX_TRACE_ROWS`] remain.
fn decimate(rows: &[TraceRow]) -> Vec<TraceRow> {
    if rows.len() <= MAX_TRACE_ROWS {
        return rows.to_vec();
    }
    let stride = (rows.len() - 1).div_ceil(MAX_TRACE_ROWS - 1);
    let mut out: Vec<TraceRow> = rows.iter().step_by(stride).copied().collect();
    let last = *rows.last().expect("non-empty");
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Writes the trace CSV. Floats use shortest round-trip formatting, so
/// identical traces give identical bytes and parse back exactly.
pub fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(TRACE_HEADER.split(','))
        .map_err(|e| Error::csv(path, e))?;
    for row in decimate(rows) {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(Error::Config(format!("{}: unexpected trace header", path.display())));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()
        .map_err(|e| Error::csv(path, e))
}
