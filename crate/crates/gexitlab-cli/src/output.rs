//! CSV and JSON artifacts. Every artifact embeds the resolved configuration
//! and contains no timing or host information, so identical configurations
//! produce byte-identical files.

use std::io::Write;

use anyhow::anyhow;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Result of a subcommand: an optional table plus a JSON summary.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
    /// False when some numerical procedure did not converge.
    pub complete: bool,
    pub default_format: Format,
}

impl Artifact {
    pub fn table(columns: Vec<&'static str>, rows: Vec<Vec<Cell>>, summary: Value) -> Artifact {
        Artifact { columns, rows, summary, complete: true, default_format: Format::Csv }
    }

    pub fn summary(summary: Value) -> Artifact {
        Artifact { columns: Vec::new(), rows: Vec::new(), summary, complete: true, default_format: Format::Json }
    }

    pub fn incomplete_if(mut self, failed: bool) -> Artifact {
        self.complete &= !failed;
        self
    }

    pub fn render(&self, command: &str, config: &Value, format: Option<Format>) -> String {
        match format.unwrap_or(self.default_format) {
            Format::Csv => {
                let mut s = String::new();
                s.push_str(&format!("# gexitlab {} {command}\n", env!("CARGO_PKG_VERSION")));
                s.push_str(&format!("# config: {}\n", serde_json::to_string(config).unwrap()));
                s.push_str(&format!("# summary: {}\n", serde_json::to_string(&self.summary).unwrap()));
                if !self.columns.is_empty() {
                    s.push_str(&self.columns.join(","));
                    s.push('\n');
                    for r in &self.rows {
                        s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                        s.push('\n');
                    }
                }
                s
            }
            Format::Json => {
                let mut v = json!({
                    "tool": "gexitlab",
                    "version": env!("CARGO_PKG_VERSION"),
                    "command": command,
                    "config": config,
                    "summary": self.summary,
                    "complete": self.complete,
                });
                if !self.columns.is_empty() {
                    v["columns"] = json!(self.columns);
                    v["rows"] = json!(self.rows);
                }
                let mut s = serde_json::to_string_pretty(&v).unwrap();
                s.push('\n');
                s
            }
        }
    }
}

/// Writes `text` to `path`, or to standard output for `-`.
pub fn write_out(path: &str, text: &str) -> Result<(), Failure> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::Io(anyhow!("stdout: {e}")))
    } else {
        std::fs::write(path, text).map_err(|e| Failure::Io(anyhow!("writing '{path}': {e}")))
    }
}
