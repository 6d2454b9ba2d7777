//! Text and image encodings of fields, traces and stability tables.
//!
//! Floats are written in the shortest form that parses back to the same value, so equal
//! inputs give byte-identical files.

use std::fmt::Write;

use crate::grid::ScalarField;
use crate::stability::CoercivityRow;
use crate::threshold_loop::IterationTrace;

pub const FIELD_CSV_HEADER: &str = "i,j,x,y,value";
pub const TRACE_CSV_HEADER: &str = "k,objective,level,increment,tie_cells,cumulative_sq";
pub const COERCIVITY_CSV_HEADER: &str = "V0,lambda0,coercivity_bound,stable,status";

/// One row per active cell, in active-index order.
pub fn field_csv(field: &ScalarField) -> String {
    let grid = field.grid();
    let mut out = String::with_capacity(48 * grid.len());
    out.push_str(FIELD_CSV_HEADER);
    out.push('\n');
    for ((&(i, j), c), v) in grid.cells().iter().zip(grid.centers()).zip(field.values()) {
        let _ = writeln!(out, "{i},{j},{},{},{v}", c[0], c[1]);
    }
    out
}

/// Binary PGM of the full lattice, top row first. Active values are mapped linearly onto
/// `1..=255`; inactive cells are `0`.
pub fn field_pgm(field: &ScalarField) -> Vec<u8> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (lo, hi) = (field.min(), field.max());
    let mut pixels = vec![0u8; nx * ny];
    for (&(i, j), &v) in grid.cells().iter().zip(field.values()) {
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
        pixels[(ny - 1 - j) * nx + i] = (1.0 + t * 254.0).round() as u8;
    }
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    out
}

/// One JSON object per iteration.
pub fn trace_jsonl(trace: &IterationTrace) -> String {
    let mut out = String::new();
    for r in &trace.records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ =
            writeln!(out, "{},{},{},{},{},{}", r.k, r.objective, r.level, r.increment, r.tie_cells, r.cumulative_sq);
    }
    out
}

/// Missing values are left empty.
pub fn coercivity_csv(rows: &[CoercivityRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from(COERCIVITY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let stable = r.stable.map_or(String::new(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.v0,
            opt(r.lambda0),
            opt(r.coercivity_bound),
            stable,
            csv_field(&r.status)
        );
    }
    out
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
