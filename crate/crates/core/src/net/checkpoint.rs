use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Layer, MlpParams};
use crate::{Error, Result};

const FORMAT: &str = "survdd-mlp";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `in_dim x out_dim`.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

pub fn checkpoint_to_string(params: &MlpParams) -> Result<String> {
    let ck = Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        layers: params
            .layers
            .iter()
            .map(|l| LayerRecord {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                weight: l.weight.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&ck)?)
}

pub fn checkpoint_from_str(s: &str) -> Result<MlpParams> {
    let ck: Checkpoint = serde_json::from_str(s)?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported checkpoint {} v{}",
            ck.format, ck.version
        )));
    }
    if ck.layers.is_empty() {
        return Err(Error::InvalidConfig("checkpoint has no layers".into()));
    }
    let mut layers = Vec::with_capacity(ck.layers.len());
    for (k, rec) in ck.layers.into_iter().enumerate() {
        if let Some(prev) = layers.last().map(Layer::out_dim) {
            if prev != rec.in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} expects {} inputs, previous layer emits {prev}",
                    rec.in_dim
                )));
            }
        }
        if rec.bias.len() != rec.out_dim {
            return Err(Error::DimensionMismatch(format!("layer {k} bias length")));
        }
        let weight = Array2::from_shape_vec((rec.in_dim, rec.out_dim), rec.weight)
            .map_err(|e| Error::DimensionMismatch(format!("layer {k} weight: {e}")))?;
        layers.push(Layer {
            weight,
            bias: Array1::from(rec.bias),
        });
    }
    let params = MlpParams { layers };
    if !params.is_finite() {
        return Err(Error::InvalidConfig("checkpoint contains non-finite values".into()));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &MlpParams, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&s)
}
