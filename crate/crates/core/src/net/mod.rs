//! Shared-embedding rectifier network, reverse-mode gradients, Adam and the
//! plateau-stopped training loop.

mod adam;
mod checkpoint;
mod linalg;
mod mlp;
mod train;


pub use adam::{Adam, AdamConfig};
pub use checkpoint::{checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint};
pub use linalg::spectral_norm;
pub use mlp::{mlp_init, param_count, Forward, Layer, MlpParams};
pub use train::{evaluate_set, loss_grad, train, Evaluation, LabeledSet, RiskMode, TrainConfig, TrainOutcome};

use ndarray::ArrayView2;

use crate::datagen::{norms, GroundTruth};
use crate::{Error, Result};

/// Output norm against the true log-hazard norm over the same subjects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZNorm {
    pub z_l2: f64,
    pub eta_l2: f64,
    pub z_rms: f64,
    pub eta_rms: f64,
    /// `z_rms - eta_rms`.
    pub deviation: f64,
}

pub fn z_norm_diagnostic(params: &MlpParams, x: ArrayView2<'_, f64>, truth: &GroundTruth) -> Result<ZNorm> {
    if params.output_dim() != 1 {
        return Err(Error::Unsupported(format!(
            "z-norm needs a single-output network, got q = {}",
            params.output_dim()
        )));
    }
    if truth.eta.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} subjects but {} true log-hazards",
            x.nrows(),
            truth.eta.len()
        )));
    }
    let z = params.forward(x)?.logits.into_raw_vec_and_offset().0;
    Ok(z_norm_of(&z, &truth.eta))
}

pub fn z_norm_of(z: &[f64], eta: &[f64]) -> ZNorm {
    let (z_rms, z_l2) = norms(z);
    let (eta_rms, eta_l2) = norms(eta);
    ZNorm {
        z_l2,
        eta_l2,
        z_rms,
        eta_rms,
        deviation: z_rms - eta_rms,
    }
}
