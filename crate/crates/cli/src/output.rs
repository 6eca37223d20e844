//! Run artifacts: results JSON, diagnostics CSV and the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DIAGNOSTICS_HEADER: &str = "sweep,elapsed_s,metric_name,metric_value";

#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub sweep: usize,
    pub elapsed_s: f64,
    pub metric: String,
    pub value: f64,
}

/// Collects per-sweep diagnostics against a common start time.
#[derive(Debug)]
pub struct Diagnostics {
    start: Instant,
    pub rows: Vec<DiagRow>,
}

impl Diagnostics {
    pub fn new(start: Instant) -> Self {
        Self { start, rows: Vec::new() }
    }

    pub fn record(&mut self, sweep: usize, metric: impl Into<String>, value: f64) {
        self.rows.push(DiagRow { sweep, elapsed_s: self.start.elapsed().as_secs_f64(), metric: metric.into(), value });
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(DIAGNOSTICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{},{}", r.sweep, r.elapsed_s, r.metric, r.value);
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub model: &'a str,
    pub version: &'a str,
    pub threads: usize,
    pub outputs: Vec<String>,
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

pub fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> CliResult<PathBuf> {
    let path = dir.join("manifest.json");
    write_file(&path, to_json(manifest))?;
    Ok(path)
}
