//! CSV and JSON output.
//!
//! CSV files start with `#`-prefixed lines holding a JSON provenance record,
//! followed by a header row and data rows. Floats are written with 17
//! significant digits so that they round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::bifurcation::Branch;
use crate::glcore::{GLState, PeriodicVectorField};
use crate::landau::QuasiPeriodicField;
use crate::spectral::SpectralGrid;
use crate::{Error, Result, C64};

pub const STATE_COLUMNS: [&str; 7] = ["y1", "y2", "re_psi", "im_psi", "alpha1", "alpha2", "curl_a"];
pub const BRANCH_COLUMNS: [&str; 8] = ["s", "lambda", "b", "energy", "residual_psi", "residual_alpha", "max_curl_a", "min_abs_psi"];

/// Scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    format!("{v:.16e}")
}

/// Writes a CSV table preceded by a provenance comment block.
pub fn write_table<P: AsRef<Path>>(path: P, provenance: &Value, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in serde_json::to_string_pretty(provenance)?.lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::InvalidParameter(format!("row has {} values for {} columns", row.len(), columns.len())));
        }
        w.write_record(row.iter().map(|v| fmt_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub provenance: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table<P: AsRef<Path>>(path: P) -> Result<Table> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = String::new();
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        match line.strip_prefix('#') {
            Some(rest) if body.is_empty() => header.push_str(rest.strip_prefix(' ').unwrap_or(rest)),
            _ => body.push_str(&line),
        }
        line.clear();
    }
    let provenance = if header.trim().is_empty() { Value::Null } else { serde_json::from_str(&header)? };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Snapshot(format!("not a number: {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != columns.len() {
            return Err(Error::Snapshot("ragged row".into()));
        }
        rows.push(row);
    }
    Ok(Table { provenance, columns, rows })
}

/// Rows `y1, y2, Re psi, Im psi, alpha1, alpha2, curl a` on the interior grid.
pub fn state_rows(psi: &QuasiPeriodicField, alpha: &PeriodicVectorField) -> Vec<Vec<f64>> {
    let grid = psi.grid;
    let sg = SpectralGrid::new(psi.cell, grid);
    let curl = sg.curl(&alpha.comp);
    let p = psi.interior();
    let mut rows = Vec::with_capacity(grid * grid);
    for j2 in 0..grid {
        for j1 in 0..grid {
            let i = j2 * grid + j1;
            rows.push(vec![
                j1 as f64 / grid as f64,
                j2 as f64 / grid as f64,
                p[i].re,
                p[i].im,
                alpha.comp[0][i],
                alpha.comp[1][i],
                curl[i],
            ]);
        }
    }
    rows
}

pub fn write_state<P: AsRef<Path>>(path: P, state: &GLState, provenance: &Value) -> Result<()> {
    write_table(path, provenance, &STATE_COLUMNS, &state_rows(&state.psi, &state.alpha))
}

/// Snapshot contents re-read from a state CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub provenance: Value,
    pub grid: usize,
    pub psi: Vec<C64>,
    pub alpha: [Vec<f64>; 2],
    pub curl_a: Vec<f64>,
}

pub fn read_state<P: AsRef<Path>>(path: P) -> Result<StateSnapshot> {
    let t = read_table(path)?;
    if t.columns.iter().map(String::as_str).ne(STATE_COLUMNS.iter().copied()) {
        return Err(Error::Snapshot(format!("unexpected columns {:?}", t.columns)));
    }
    let len = t.rows.len();
    let grid = (len as f64).sqrt().round() as usize;
    if grid * grid != len || grid == 0 {
        return Err(Error::Snapshot(format!("{len} rows do not form a square grid")));
    }
    let mut psi = vec![C64::new(0.0, 0.0); len];
    let mut alpha = [vec![0.0; len], vec![0.0; len]];
    let mut curl_a = vec![0.0; len];
    for row in &t.rows {
        let j1 = (row[0] * grid as f64).round() as usize;
        let j2 = (row[1] * grid as f64).round() as usize;
        if j1 >= grid || j2 >= grid {
            return Err(Error::Snapshot(format!("grid point ({}, {}) out of range", row[0], row[1])));
        }
        let i = j2 * grid + j1;
        psi[i] = C64::new(row[2], row[3]);
        alpha[0][i] = row[4];
        alpha[1][i] = row[5];
        curl_a[i] = row[6];
    }
    Ok(StateSnapshot { provenance: t.provenance, grid, psi, alpha, curl_a })
}

pub fn branch_rows(branch: &Branch) -> Vec<Vec<f64>> {
    branch
        .points
        .iter()
        .map(|p| vec![p.s, p.lambda, p.b, p.energy, p.residual_psi, p.residual_alpha, p.max_curl_a, p.min_abs_psi])
        .collect()
}

pub fn write_branch<P: AsRef<Path>>(path: P, branch: &Branch, provenance: &Value) -> Result<()> {
    write_table(path, provenance, &BRANCH_COLUMNS, &branch_rows(branch))
}

pub fn write_json<P: AsRef<Path>, T: Serialize + ?Sized>(path: P, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
