//! Result tables and their CSV / JSON encodings.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! parsed value is bit-identical to the computed one.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{CliError, Result};

pub const VERSION: &str = env!("BANDWIGNER_BUILD_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Uint(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Uint(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Uint(v) => json!(v),
            // JSON has no NaN or infinity
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(v.to_string()),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Uint(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Uint(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Values of a numeric column, `None` for empty or text cells.
    pub fn floats(&self, name: &str) -> Vec<Option<f64>> {
        let idx = self.column(name).unwrap_or_else(|| panic!("no column '{name}'"));
        self.rows.iter().map(|r| r[idx].as_f64()).collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| CliError::Encode(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field))
                .map_err(|e| CliError::Encode(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Encode(e.to_string()))
    }

    pub fn to_json(&self, meta: &Metadata) -> Result<Vec<u8>> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({ "metadata": meta.to_json(), "rows": rows });
        let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Encode(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }
}

/// Provenance block of JSON output.
#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seed_derivation: String,
}

impl Metadata {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            command: cfg.command.name().to_string(),
            version: VERSION.to_string(),
            config: cfg.echo.clone(),
            seed_derivation: format!(
                "row seed = mix64({} ^ row_index * 0x9E3779B97F4A7C15); trial seed = mix64(row_seed ^ trial_index * 0x9E3779B97F4A7C15); mix64 = SplitMix64 finalizer",
                cfg.seed
            ),
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "seed_derivation": self.seed_derivation,
        })
    }
}

pub fn encode(table: &Table, cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    match cfg.format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => table.to_json(&Metadata::for_config(cfg)),
    }
}

/// Writes the encoded table to `cfg.out`, or to `stdout` when unset.
pub fn emit(table: &Table, cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<()> {
    let bytes = encode(table, cfg)?;
    match &cfg.out {
        Some(path) => write_file(path, &bytes),
        None => stdout.write_all(&bytes).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
