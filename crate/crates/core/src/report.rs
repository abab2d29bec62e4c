//! CSV tables and the manifest that ties an output directory together.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// [`fmt_float`], or an empty cell for `None`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// A named CSV table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner()
            .map_err(|e| Error::io(self.file_name(), e.into_error()))
    }
}

/// Everything one run writes: tables plus the seed and configuration that
/// produced them.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub seed: u64,
    pub config: serde_json::Value,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes each table as `<name>.csv` under `out_dir` plus `manifest.json`.
/// Output bytes depend only on the report's contents.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::with_capacity(report.tables.len());
    for table in &report.tables {
        let bytes = table.to_csv_bytes()?;
        let path = out_dir.join(table.file_name());
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        files.push(ManifestEntry {
            name: table.file_name(),
            rows: table.rows.len(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        seed: report.seed,
        config_hash: sha256_hex(&serde_json::to_vec(&report.config)?),
        files,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
