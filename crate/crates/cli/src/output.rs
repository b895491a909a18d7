//! Flat CSV tables and the JSON result record.
//!
//! Column names carry their units: `_rad` for angles and couplings,
//! `_photons` for photon numbers, `_s` for delays. `normalized` columns are
//! divided by the ensemble mean photon number and are dimensionless.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const TABLE_FILE: &str = "results.csv";
pub const RECORD_FILE: &str = "record.json";
pub const CONFIG_FILE: &str = "config.resolved.toml";
/// Wall-clock metadata, kept apart so the other files are reproducible.
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Real(f64),
    Count(u64),
}

impl Cell {
    /// Reals use 17 significant digits, enough to round-trip any `f64`.
    pub fn render(&self) -> String {
        match *self {
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Count(n) => n.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Count(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Count(n as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Count(b as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableInfo {
    pub file: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub started_unix_seconds: f64,
    pub elapsed_seconds: f64,
    pub workers: Option<usize>,
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Writes the table, record, resolved config and timing into `dir`.
pub fn write_all(
    dir: &Path,
    table: &Table,
    record_json: &str,
    resolved_toml: &str,
    timing: &Timing,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let timing = serde_json::to_string_pretty(timing).expect("timing serializes") + "\n";
    Ok(vec![
        write(dir, TABLE_FILE, &table.to_csv())?,
        write(dir, RECORD_FILE, record_json)?,
        write(dir, CONFIG_FILE, resolved_toml)?,
        write(dir, TIMING_FILE, &timing)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -6.02214076e23, f64::MIN_POSITIVE, 5e-324] {
            let text = Cell::Real(x).render();
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{text}");
        }
    }

    #[test]
    fn header_plus_one_line_per_row() {
        let mut t = Table::new(vec!["index", "g_rad"]);
        for i in 0..5u64 {
            t.push(vec![i.into(), (i as f64 * 1e-8).into()]);
        }
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert_eq!(csv.lines().next().unwrap(), "index,g_rad");
        assert_eq!(csv.lines().nth(2).unwrap(), "1,1.0000000000000000e-8");
    }
}
