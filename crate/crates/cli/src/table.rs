//! Result tables written as CSV and JSON twins.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{fmt_num, write_file};
use crate::error::CliError;

pub const VERSION: &str = env!("SPECTRAL_COPULA_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub config_hash: String,
    pub runtime_secs: f64,
    pub version: String,
}

/// Labelled rows of numeric cells. Non-finite cells are stored as `null`
/// in JSON and as `NaN` in CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub row_labels: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub meta: TableMeta,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str], config_hash: &str) -> Self {
        ResultTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            row_labels: Vec::new(),
            rows: Vec::new(),
            meta: TableMeta { config_hash: config_hash.to_string(), runtime_secs: 0.0, version: VERSION.to_string() },
        }
    }

    pub fn push(&mut self, label: impl Into<String>, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len(), "row width for table {}", self.name);
        self.row_labels.push(label.into());
        self.rows.push(values.iter().map(|v| v.is_finite().then_some(*v)).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k].unwrap_or(f64::NAN)).collect())
    }

    pub fn get(&self, label: &str, column: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == label)?;
        let k = self.columns.iter().position(|c| c == column)?;
        Some(self.rows[r][k].unwrap_or(f64::NAN))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# config_hash={} version={}\nlabel,{}\n", self.meta.config_hash, self.meta.version, self.columns.join(","));
        for (label, row) in self.row_labels.iter().zip(&self.rows) {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(v.unwrap_or(f64::NAN))).collect();
            out.push_str(&format!("{label},{}\n", cells.join(",")));
        }
        out
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
        let csv = dir.join(format!("{}.csv", self.name));
        let json = dir.join(format!("{}.json", self.name));
        write_file(&csv, self.to_csv().as_bytes())?;
        write_file(&json, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok((csv, json))
    }

    pub fn read_json(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rounded rendering for the terminal.
    pub fn render(&self) -> String {
        let width = 12;
        let lw = self.row_labels.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut out = format!("{}\n{:lw$}", self.name, "");
        for c in &self.columns {
            out.push_str(&format!(" {c:>width$}"));
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.rows) {
            out.push_str(&format!("{label:lw$}"));
            for v in row {
                let s = match v {
                    None => "-".to_string(),
                    Some(x) if x.abs() >= 1e4 => format!("{x:.0}"),
                    Some(x) => format!("{x:.3}"),
                };
                out.push_str(&format!(" {s:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}
