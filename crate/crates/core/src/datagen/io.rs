use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{GenConfig, GeneratedDataset, Grid, SurvivalData};
use crate::{Error, Result};

/// Everything about a generated file that is not per-row data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub config: GenConfig,
    pub seed: u64,
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub censoring_fraction: f64,
    pub eta: Vec<f64>,
    pub eta_rms: f64,
    pub eta_l2: f64,
    /// Grid used for interval models, when one has been built.
    pub grid: Option<Grid>,
}

impl DatasetSidecar {
    pub fn new(g: &GeneratedDataset, grid: Option<Grid>) -> Self {
        Self {
            config: g.config.clone(),
            seed: g.config.seed,
            beta: g.truth.beta.clone(),
            support: g.truth.support.clone(),
            censoring_fraction: g.censoring_fraction,
            eta: g.truth.eta.clone(),
            eta_rms: g.truth.eta_rms,
            eta_l2: g.truth.eta_l2,
            grid,
        }
    }
}

/// Writes `<prefix>.csv` (header `x_1..x_p,time,event`) and
/// `<prefix>.json`.
pub fn write_dataset(g: &GeneratedDataset, grid: Option<Grid>, prefix: &Path) -> Result<()> {
    let csv_path = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let p = g.data.x.ncols();
    let mut header: Vec<String> = (1..=p).map(|k| format!("x_{k}")).collect();
    header.push("time".into());
    header.push("event".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(p + 2);
    for i in 0..g.data.len() {
        row.clear();
        row.extend(g.data.x.row(i).iter().map(|v| v.to_string()));
        row.push(g.data.time[i].to_string());
        row.push(if g.data.event[i] { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let sidecar = DatasetSidecar::new(g, grid);
    let mut f = fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<SurvivalData> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = r.headers()?.clone();
    let ncol = headers.len();
    if ncol < 2 || &headers[ncol - 2] != "time" || &headers[ncol - 1] != "event" {
        return Err(Error::InvalidConfig(format!(
            "{}: expected header x_1..x_p,time,event",
            path.display()
        )));
    }
    let p = ncol - 2;
    let mut flat = Vec::new();
    let mut time = Vec::new();
    let mut event = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("{} row {}: {e}", path.display(), line + 1)))
        };
        for k in 0..p {
            flat.push(parse(&rec[k])?);
        }
        time.push(parse(&rec[p])?);
        event.push(match &rec[p + 1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{} row {}: event must be 0 or 1, got {other}",
                    path.display(),
                    line + 1
                )))
            }
        });
    }
    let x = Array2::from_shape_vec((time.len(), p), flat).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    SurvivalData::new(x, time, event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_dataset;

    #[test]
    fn csv_round_trip_and_byte_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig {
            n: 30,
            ..GenConfig::desk()
        };
        let g = generate_dataset(&cfg).unwrap();
        write_dataset(&g, None, &dir.path().join("a")).unwrap();
        write_dataset(&generate_dataset(&cfg).unwrap(), None, &dir.path().join("b")).unwrap();
        for ext in ["csv", "json"] {
            let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
            let b = fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
            assert_eq!(a, b);
        }
        let back = read_dataset_csv(&dir.path().join("a.csv")).unwrap();
        assert_eq!(back, g.data);
        let side: DatasetSidecar = serde_json::from_slice(&fs::read(dir.path().join("a.json")).unwrap()).unwrap();
        assert_eq!(side.support, g.truth.support);
        assert_eq!(side.eta, g.truth.eta);
    }
}
