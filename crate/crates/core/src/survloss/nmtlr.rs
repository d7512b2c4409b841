//! Neural multi-task logistic regression over cumulative scores.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::numerics::{log_sum_exp, sigmoid, softplus};
use super::{check_finite, check_interval_logits, LossReport};
use crate::datagen::DiscretizedDataset;
use crate::{Error, Result};

/// Suffix sums `C_j = sum_{k >= j} z_k`.
pub fn cumulative_scores(z: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut c = z.to_owned();
    for j in (0..c.len().saturating_sub(1)).rev() {
        c[j] += c[j + 1];
    }
    c
}

/// Interval probabilities `p_j = softmax(C)_j` and survival beyond each
/// interval `S_j = sum_{l > j} p_l`.
pub fn nmtlr_probabilities(z: ArrayView1<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    let c = cumulative_scores(z);
    let lse = log_sum_exp(c.iter().copied());
    let p = c.mapv(|v| (v - lse).exp());
    let mut s = Array1::zeros(p.len());
    for j in (0..p.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] + p[j + 1];
    }
    (p, s)
}

/// `-sum_i [delta_i ln p_{j(i)} + (1 - delta_i) ln S_{j(i)}]`.
///
/// Censored subjects in the final interval have an empty survival tail and
/// are rejected; build the grid with a trailing empty interval.
pub fn nmtlr_loss(logits: ArrayView2<'_, f64>, disc: &DiscretizedDataset) -> Result<LossReport> {
    check_interval_logits(logits, disc)?;
    check_finite(logits)?;
    let (n, m) = logits.dim();
    if let Some(i) = (0..n).find(|&i| !disc.event[i] && disc.interval_of[i] + 1 >= m) {
        return Err(Error::TailDefinition(i));
    }
    let mut per_sample = vec![0.0; n];
    let mut grad = Array2::zeros((n, m));
    let mut margin: Option<f64> = None;
    let mut g_c = vec![0.0; m];
    for i in 0..n {
        let c = cumulative_scores(logits.row(i));
        let j = disc.interval_of[i];
        let lse_all = log_sum_exp(c.iter().copied());
        if disc.event[i] {
            let others = log_sum_exp(c.iter().enumerate().filter(|&(l, _)| l != j).map(|(_, &v)| v));
            let a = others - c[j];
            per_sample[i] = softplus(a);
            for l in 0..m {
                g_c[l] = if l == j { -sigmoid(a) } else { (c[l] - lse_all).exp() };
            }
            let best_other = c
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let mi = c[j] - best_other;
            margin = Some(margin.map_or(mi, |g: f64| g.min(mi)));
        } else {
            let head = log_sum_exp(c.iter().take(j + 1).copied());
            let tail = log_sum_exp(c.iter().skip(j + 1).copied());
            let a = head - tail;
            per_sample[i] = softplus(a);
            let miss = sigmoid(a);
            for l in 0..m {
                g_c[l] = if l <= j {
                    (c[l] - lse_all).exp()
                } else {
                    -(c[l] - tail).exp() * miss
                };
            }
        }
        // z_k enters C_l for every l <= k
        let mut run = 0.0;
        for k in 0..m {
            run += g_c[k];
            grad[[i, k]] = run;
        }
    }
    Ok(LossReport::new(per_sample, grad, margin))
}
