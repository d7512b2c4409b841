//! Capacity sweeps: train every (width, lr, batch, replicate) cell, aggregate
//! the rows into per-width curves, locate the interpolation threshold and
//! persist or plot the results.

mod aggregate;
mod persist;
mod plot;
mod run;

#[cfg(test)]
mod tests;

pub use aggregate::{aggregate, curve_threshold, detect_threshold, median, threshold_tolerance, Aggregate, CurvePoint};
pub use persist::{
    config_hash, read_curves, read_manifest, read_rows, write_curves, write_manifest, write_rows, Manifest, ROW_HEADER,
};
pub use plot::render_curves;
pub use run::{grid_cells, run_sweep, train_cell, Cell, SweepData};

use serde::{Deserialize, Serialize};

use crate::datagen::GenConfig;
use crate::net::{RiskMode, TrainConfig};
use crate::survloss::LossKind;
use crate::{Error, Result};

pub const FULL_BATCHES: [usize; 4] = [32, 64, 128, 256];
pub const FULL_LRS: [f64; 6] = [5e-5, 1e-4, 3e-4, 5e-4, 1e-3, 2e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: LossKind,
    pub widths: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    /// Generator settings for the pooled sample; `data.n` is the pool size.
    pub data: GenConfig,
    pub train_frac: f64,
    /// Interval count for interval models (the N-MTLR grid adds one empty tail interval).
    pub intervals: usize,
    pub jobs: usize,
    /// Optimiser and stopping settings; `lr`, `batch_size` and `seed` are set per cell.
    pub train: TrainConfig,
}

impl SweepConfig {
    /// Laptop-scale preset: 400 pooled subjects, 30 covariates, widths 2..256.
    pub fn desk(model: LossKind) -> Self {
        let deepsurv = model == LossKind::DeepSurv;
        Self {
            model,
            widths: (1..=8).map(|k| 1 << k).collect(),
            batch_sizes: vec![32],
            learning_rates: vec![1e-3, 2e-3],
            replicates: 5,
            base_seed: 20_251_016,
            data: GenConfig::desk(),
            train_frac: 0.7,
            intervals: model.default_intervals(),
            jobs: 1,
            train: TrainConfig {
                max_epochs: if deepsurv { 5000 } else { 2000 },
                window: if deepsurv { 200 } else { 100 },
                risk_mode: if deepsurv {
                    RiskMode::FullBatch
                } else {
                    RiskMode::BatchLocal
                },
                ..TrainConfig::default()
            },
        }
    }

    /// Full grid: 3500 training subjects, 200 covariates (60 for DeepSurv),
    /// 30 replicates.
    pub fn full(model: LossKind) -> Self {
        let p = if model == LossKind::DeepSurv { 60 } else { 200 };
        Self {
            model,
            widths: (1..=10).map(|k| 1 << k).collect(),
            batch_sizes: FULL_BATCHES.to_vec(),
            learning_rates: FULL_LRS.to_vec(),
            replicates: 30,
            base_seed: 20_251_016,
            data: GenConfig {
                n: 5000,
                ..GenConfig::reference(p)
            },
            train_frac: 0.7,
            intervals: model.default_intervals(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.widths.is_empty() || self.batch_sizes.is_empty() || self.learning_rates.is_empty() {
            return bad("width, batch and learning-rate grids must be nonempty".into());
        }
        if self.widths.contains(&0) || self.batch_sizes.contains(&0) {
            return bad("widths and batch sizes must be positive".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return bad(format!("train_frac must lie in (0, 1), got {}", self.train_frac));
        }
        if self.model.is_interval() && self.intervals == 0 {
            return bad("intervals must be positive".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        self.data.validate()?;
        for &lr in &self.learning_rates {
            TrainConfig {
                lr,
                ..self.train.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    /// Batch sizes actually trained: one full batch for full-batch DeepSurv.
    pub fn effective_batches(&self, n_train: usize) -> Vec<usize> {
        if self.model == LossKind::DeepSurv && self.train.risk_mode == RiskMode::FullBatch {
            vec![n_train]
        } else {
            let mut b: Vec<usize> = self.batch_sizes.iter().map(|&b| b.min(n_train)).collect();
            b.sort_unstable();
            b.dedup();
            b
        }
    }
}

/// Outcome of one trained cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: LossKind,
    pub width: usize,
    pub d: usize,
    pub lr: f64,
    pub batch: usize,
    pub replicate: usize,
    /// Per-sample loss on the training split.
    pub train_loss: f64,
    pub test_loss: f64,
    /// Spectral norm of the readout weight.
    pub w_norm: f64,
    pub margin: Option<f64>,
    /// RMS of the network output minus RMS of the true log-hazard on the test split.
    pub z_norm_deviation: Option<f64>,
    pub converged_epoch: Option<usize>,
    pub diverged: bool,
    pub seed: u64,
    pub epochs_run: usize,
    pub init_train_loss: f64,
    /// Per-sample infimum of the training loss.
    pub train_infimum: f64,
    pub train_loss_raw: f64,
    pub max_embedding_norm: f64,
    pub budget_lhs: Option<f64>,
    pub budget_rhs: Option<f64>,
    pub risk_mode: RiskMode,
}

impl SweepRow {
    pub fn cell(&self) -> Cell {
        Cell {
            width: self.width,
            lr: self.lr,
            batch: self.batch,
            replicate: self.replicate,
        }
    }
}
