//! Result persistence: versioned JSON, CSV tables and binary snapshot dumps.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nf_core::model::GridSpec;

use crate::LabError;

pub const SCHEMA_VERSION: u32 = 1;
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NFSNAP01";

/// Every JSON document written by the lab.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, config_hash: &str, seed: u64, data: T) -> Self {
        Envelope {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            data,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>, LabError> {
    let text = fs::read_to_string(path)?;
    let env: Envelope<T> = serde_json::from_str(&text)?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(LabError::Config(format!(
            "{}: schema version {} (expected {SCHEMA_VERSION})",
            path.display(),
            env.schema_version
        )));
    }
    Ok(env)
}

/// Header line followed by rows, all cells formatted with full precision.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Layout: 8-byte magic, u32 schema version, f64 half_length, u64 n_points,
/// f64 spacing, u64 row count, then the rows back to back, each n_points f64.
/// All values little-endian.
pub fn write_snapshots(path: &Path, grid: &GridSpec, rows: &[&[f64]]) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let n = grid.n();
    let mut buf = Vec::with_capacity(44 + 8 * n * rows.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    buf.extend_from_slice(&grid.half_length.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&grid.spacing.to_le_bytes());
    buf.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for r in rows {
        if r.len() != n {
            return Err(LabError::Config(format!("snapshot row of length {} on a {n}-point grid", r.len())));
        }
        for v in r.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotDump {
    pub half_length: f64,
    pub n_points: usize,
    pub spacing: f64,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotDump, LabError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let corrupt = || LabError::Config(format!("{}: not a snapshot dump", path.display()));
    if bytes.len() < 44 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(corrupt());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != SCHEMA_VERSION {
        return Err(corrupt());
    }
    let half_length = f64_at(12);
    let n = u64_at(20) as usize;
    let spacing = f64_at(28);
    let nrows = u64_at(36) as usize;
    if bytes.len() != 44 + 8 * n * nrows {
        return Err(corrupt());
    }
    let rows = (0..nrows)
        .map(|r| (0..n).map(|i| f64_at(44 + 8 * (r * n + i))).collect())
        .collect();
    Ok(SnapshotDump {
        half_length,
        n_points: n,
        spacing,
        rows,
    })
}
