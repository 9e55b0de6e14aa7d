//! CSV tables and their JSON sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliError;

/// Version of the CSV column layouts and sidecar format.
pub const SCHEMA_VERSION: &str = "rcs-output/1";

/// One CSV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
}

impl Cell {
    /// Floats carry 17 significant digits, enough to round-trip any `f64`.
    pub fn render(&self) -> String {
        match *self {
            Cell::Float(x) if x.is_nan() => "NaN".into(),
            Cell::Float(x) if x.is_infinite() => if x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

/// Column layout plus rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// RFC 4180 layout with a header row and LF line endings.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub schema_version: &'static str,
    pub experiment: &'static str,
    pub columns: &'static [&'static str],
    pub seed: u64,
    /// Complete resolved configuration; feeding this file back through
    /// `--config` reproduces the CSV.
    pub config: &'a RunConfig,
    pub rcs_version: &'static str,
    pub results: Value,
}

/// Writes the CSV and its sidecar.
pub fn write_outputs(out: &Path, cfg: &RunConfig, table: &Table, results: Value) -> Result<(), CliError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    std::fs::write(out, table.to_csv()).map_err(|e| CliError::io(out.display(), e))?;
    let meta = Sidecar {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.experiment.name(),
        columns: table.columns,
        seed: cfg.seed,
        config: cfg,
        rcs_version: env!("CARGO_PKG_VERSION"),
        results,
    };
    let path = sidecar_path(out);
    let mut text = serde_json::to_string_pretty(&meta).expect("sidecar serialises");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(path.display(), e))
}
