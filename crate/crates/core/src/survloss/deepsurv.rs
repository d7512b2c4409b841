//! Negative log partial likelihood (Breslow ties).

use ndarray::{Array2, ArrayView2};

use super::numerics::{log_add_exp, softplus};
use super::{check_finite, LossReport, RiskSetIndex};
use crate::datagen::{GroundTruth, SurvivalData};
use crate::{Error, Result};

/// Running summary of `sum_j exp(z_j)` over a prefix of the risk ordering,
/// stored as `exp(max) * (1 + rest)` so that the largest term is exact.
#[derive(Clone, Copy)]
struct PrefixSum {
    max: f64,
    argmax: usize,
    rest: f64,
    second: f64,
}

impl PrefixSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            argmax: usize::MAX,
            rest: 0.0,
            second: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, j: usize, z: f64) {
        if z > self.max {
            if self.max > f64::NEG_INFINITY {
                self.rest = (1.0 + self.rest) * (self.max - z).exp();
            }
            self.second = self.max;
            self.max = z;
            self.argmax = j;
        } else {
            self.rest += (z - self.max).exp();
            self.second = self.second.max(z);
        }
    }

    /// `ln sum_{j in prefix} exp(z_j)`.
    fn lse(&self) -> f64 {
        self.max + self.rest.ln_1p()
    }

    /// `ln sum_{j in prefix, j != i} exp(z_j)` for a member `i`.
    fn lse_without(&self, i: usize, zi: f64) -> f64 {
        if i == self.argmax {
            if self.rest > 0.0 {
                self.max + self.rest.ln()
            } else {
                f64::NEG_INFINITY
            }
        } else {
            // rest contains exp(zi - max) and the leading 1 belongs to argmax
            self.max + (self.rest - (zi - self.max).exp()).ln_1p()
        }
    }

    fn max_without(&self, i: usize) -> f64 {
        if i == self.argmax {
            self.second
        } else {
            self.max
        }
    }
}

/// `-sum_{i: delta_i = 1} [z_i - ln sum_{j in R_i} exp(z_j)]`.
///
/// Per-sample terms are `ln(1 + sum_{j in R_i \ i} exp(z_j - z_i))` for
/// events and zero otherwise. The margin is the smallest
/// `z_i - max_{j in R_i \ i} z_j` over events (`+inf` when every risk set is
/// a singleton).
pub fn deepsurv_loss(logits: ArrayView2<'_, f64>, risk: &RiskSetIndex) -> Result<LossReport> {
    let n = risk.n();
    if logits.dim() != (n, 1) {
        return Err(Error::DimensionMismatch(format!(
            "DeepSurv expects {n}x1 logits, got {:?}",
            logits.dim()
        )));
    }
    check_finite(logits)?;
    let z = logits.column(0);

    let groups = risk.groups();
    let mut per_sample = vec![0.0; n];
    let mut lse_at = vec![0.0; n];
    let mut margin: Option<f64> = None;

    let mut acc = PrefixSum::new();
    for &(start, end) in &groups {
        for &j in &risk.order[start..end] {
            acc.push(j, z[j]);
        }
        for &i in &risk.order[start..end] {
            if !risk.event[i] {
                continue;
            }
            per_sample[i] = softplus(acc.lse_without(i, z[i]) - z[i]);
            lse_at[i] = acc.lse();
            let m = z[i] - acc.max_without(i);
            margin = Some(margin.map_or(m, |g: f64| g.min(m)));
        }
    }

    // d/dz_k = sum_{events i, T_i <= T_k} exp(z_k - lse_i) - delta_k
    let mut grad = Array2::zeros((n, 1));
    let mut acc_neg_lse = f64::NEG_INFINITY;
    for &(start, end) in groups.iter().rev() {
        for &i in &risk.order[start..end] {
            if risk.event[i] {
                acc_neg_lse = log_add_exp(acc_neg_lse, -lse_at[i]);
            }
        }
        for &k in &risk.order[start..end] {
            grad[[k, 0]] = (z[k] + acc_neg_lse).exp() - if risk.event[k] { 1.0 } else { 0.0 };
        }
    }

    Ok(LossReport::new(per_sample, grad, margin))
}

/// Partial likelihood evaluated at the data-generating log-hazard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueNpll {
    pub raw: f64,
    pub per_event: f64,
    pub per_sample: f64,
}

pub fn deepsurv_true_npll(data: &SurvivalData, truth: &GroundTruth) -> Result<TrueNpll> {
    if truth.eta.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} subjects but {} true log-hazards",
            data.len(),
            truth.eta.len()
        )));
    }
    let risk = RiskSetIndex::new(&data.time, &data.event);
    let z = Array2::from_shape_vec((data.len(), 1), truth.eta.clone())
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let rep = deepsurv_loss(z.view(), &risk)?;
    Ok(TrueNpll {
        raw: rep.total,
        per_event: rep.per_event(&data.event),
        per_sample: rep.mean(),
    })
}
