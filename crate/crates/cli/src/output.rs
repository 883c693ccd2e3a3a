//! CSV and JSON emission.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Shortest round-trip decimal, with exponent notation for very large or
/// small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, config_hash: &str, header: &[&str]) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        write!(out, "# config_hash = {config_hash}\n{}\n", header.join(","))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, cells: &[String]) -> std::io::Result<()> {
        debug_assert_eq!(cells.len(), self.columns, "row width for {}", self.path.display());
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub artifact_version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub status: &'static str,
    pub error: Option<ErrorInfo>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub resonant_modes: Vec<usize>,
    pub t_q: Option<f64>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}
