//! Piecewise-constant hazard with softplus-linked interval rates.

use ndarray::{Array2, ArrayView2};

use super::numerics::{ln_softplus, sigmoid, sigmoid_over_softplus, softplus};
use super::{check_finite, check_interval_logits, interval_margin, LossReport};
use crate::datagen::DiscretizedDataset;
use crate::{Error, Result};

/// `sum_i [-delta_i ln h_{j(i)} + rho_i h_{j(i)} + sum_{k < j(i)} h_k]`
/// with `h = softplus(z)`.
pub fn pchazard_loss(logits: ArrayView2<'_, f64>, disc: &DiscretizedDataset) -> Result<LossReport> {
    check_interval_logits(logits, disc)?;
    check_finite(logits)?;
    if let Some(i) = disc.rho_of.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::InvalidDiscretization(format!(
            "subject {i} has exposure fraction {}",
            disc.rho_of[i]
        )));
    }
    let (n, m) = logits.dim();
    let mut per_sample = vec![0.0; n];
    let mut grad = Array2::zeros((n, m));
    for i in 0..n {
        let last = disc.interval_of[i];
        let rho = disc.rho_of[i];
        let row = logits.row(i);
        let mut li = 0.0;
        for k in 0..last {
            li += softplus(row[k]);
            grad[[i, k]] = sigmoid(row[k]);
        }
        let z = row[last];
        li += rho * softplus(z);
        let mut g = rho * sigmoid(z);
        if disc.event[i] {
            li -= ln_softplus(z);
            g -= sigmoid_over_softplus(z);
        }
        grad[[i, last]] = g;
        per_sample[i] = li;
    }
    Ok(LossReport::new(per_sample, grad, interval_margin(logits, disc)))
}

/// `sum_{events} (1 + ln rho_i)`, the greatest lower bound of the loss.
pub fn pchazard_infimum(disc: &DiscretizedDataset) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..disc.n() {
        if disc.event[i] {
            let rho = disc.rho_of[i];
            if !(rho > 0.0) {
                return Err(Error::DegenerateExposure(i));
            }
            total += 1.0 + rho.ln();
        }
    }
    Ok(total)
}
