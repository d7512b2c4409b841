//! Discrete-time logistic hazard.

use ndarray::{Array2, ArrayView2};

use super::numerics::{sigmoid, softplus};
use super::{check_finite, check_interval_logits, interval_margin, LossReport};
use crate::datagen::DiscretizedDataset;
use crate::Result;

/// Binary cross-entropy over every at-risk cell, written as
/// `ln(1 + exp(-s z))` with `s = +1` for the event cell and `-1` otherwise.
pub fn nnet_loss(logits: ArrayView2<'_, f64>, disc: &DiscretizedDataset) -> Result<LossReport> {
    check_interval_logits(logits, disc)?;
    check_finite(logits)?;
    let (n, m) = logits.dim();
    let mut per_sample = vec![0.0; n];
    let mut grad = Array2::zeros((n, m));
    for i in 0..n {
        let row = logits.row(i);
        let mut li = 0.0;
        for k in 0..=disc.interval_of[i] {
            let z = row[k];
            if disc.y(i, k) {
                li += softplus(-z);
                grad[[i, k]] = sigmoid(z) - 1.0;
            } else {
                li += softplus(z);
                grad[[i, k]] = sigmoid(z);
            }
        }
        per_sample[i] = li;
    }
    Ok(LossReport::new(per_sample, grad, interval_margin(logits, disc)))
}
