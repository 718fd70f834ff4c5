//! CSV and manifest writers. Every file is written to a temporary file in
//! the output directory and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.flush().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// A `#` comment line naming units and gauge, a header row, then records.
pub struct Table {
    comment: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(comment: impl Into<String>, header: &[&str]) -> Self {
        Table { comment: comment.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        for line in self.comment.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(CliError::csv)?;
        for r in &self.rows {
            w.write_record(r).map_err(CliError::csv)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, &self.to_bytes()?)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}_manifest.json", self.command));
        let text = serde_json::to_vec_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&path, &text)?;
        Ok(path)
    }
}
