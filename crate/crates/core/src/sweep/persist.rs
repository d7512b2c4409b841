use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CurvePoint, SweepConfig, SweepRow};
use crate::{Error, Result};

/// Column order of the row CSV.
pub const ROW_HEADER: [&str; 22] = [
    "model",
    "width",
    "d",
    "lr",
    "batch",
    "replicate",
    "train_loss",
    "test_loss",
    "w_norm",
    "margin",
    "z_norm_deviation",
    "converged_epoch",
    "diverged",
    "seed",
    "epochs_run",
    "init_train_loss",
    "train_infimum",
    "train_loss_raw",
    "max_embedding_norm",
    "budget_lhs",
    "budget_rhs",
    "risk_mode",
];

pub(crate) fn append_row(file: &mut File, row: &SweepRow) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.serialize(row)?;
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_rows(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(ROW_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if !header.iter().eq(ROW_HEADER) {
        return Err(Error::InvalidConfig(format!(
            "{}: unexpected row columns {:?}",
            path.display(),
            header
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_curves(points: &[CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|p| p.map_err(Error::from)).collect()
}

/// Hex SHA-256 of the compact JSON form of a configuration.
pub fn config_hash(cfg: &SweepConfig) -> Result<String> {
    let json = serde_json::to_string(cfg)?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub row_columns: Vec<String>,
    pub config: SweepConfig,
}

impl Manifest {
    pub fn new(cfg: &SweepConfig) -> Result<Self> {
        Ok(Self {
            tool: "survdd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(cfg)?,
            row_columns: ROW_HEADER.iter().map(|s| s.to_string()).collect(),
            config: cfg.clone(),
        })
    }
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(m)?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}
