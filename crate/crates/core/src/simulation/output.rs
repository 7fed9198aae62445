//! Atomic result files with a provenance header.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::Result;

pub const TOOL: &str = concat!("fusedlasso ", env!("CARGO_PKG_VERSION"));

/// First line of every CSV output.
pub fn csv_header(config_hash: &str) -> String {
    format!("# {TOOL} config_hash={config_hash}\n")
}

/// Hex SHA-256 of the compact JSON form of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let canon = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// A small CSV table with a provenance comment line.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut s = csv_header(config_hash);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        write_atomic(path, self.render(config_hash).as_bytes())
    }
}

/// Shortest round-trip formatting; empty for missing values.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
