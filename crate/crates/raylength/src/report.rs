//! CSV tables and the JSON run manifest.

use std::path::{Path, PathBuf};

use raylength_core::Vec3;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Result, ShellError};

/// Shortest round-trip representation of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Vector as space-separated components, one CSV field.
pub fn vec3(v: Vec3) -> String {
    format!("{:?} {:?} {:?}", v.x, v.y, v.z)
}

/// CSV file with `#` comment lines carrying the command, seed and version,
/// followed by the column header and the rows.
pub fn write_csv(dir: &Path, name: &str, config: &RunConfig, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    let command = serde_json::to_value(config.command)?;
    buf.extend_from_slice(
        format!("# raylength {} command={} seed={}\n", env!("CARGO_PKG_VERSION"), command.as_str().unwrap_or(""), config.seed).as_bytes(),
    );
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| ShellError::io(&path, e))?;
    }
    std::fs::write(&path, buf).map_err(|e| ShellError::io(&path, e))?;
    Ok(path)
}

/// Reads a CSV file written by [`write_csv`]: header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| ShellError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub created_unix: u64,
    pub config: &'a RunConfig,
    pub scene: String,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| ShellError::io(&path, e))?;
    Ok(path)
}
