use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;

use super::ARITH_SLACK;
use crate::datagen::DiscretizedDataset;
use crate::net::{Adam, AdamConfig};
use crate::survloss::numerics::inv_softplus;
use crate::survloss::{deepsurv_loss, nmtlr_loss, nnet_loss, pchazard_loss, RiskSetIndex};
use crate::{Error, Result};

pub const DEFAULT_T_GRID: [f64; 6] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub t: f64,
    pub loss: f64,
    /// `sum_i ln(1 + k_i e^{-t gamma})` with `k_i = |R_i| - 1`.
    pub bound: f64,
}

/// DeepSurv loss along the ray `t * z_base` of a risk-set separable score.
pub fn deepsurv_scaling_path(z_base: &[f64], risk: &RiskSetIndex, t_grid: &[f64]) -> Result<Vec<ScalingPoint>> {
    let n = risk.time.len();
    if z_base.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {n} subjects",
            z_base.len()
        )));
    }
    let mut gamma = f64::INFINITY;
    let mut rivals = Vec::new();
    for i in (0..n).filter(|&i| risk.event[i]) {
        let mut k = 0usize;
        for j in (0..n).filter(|&j| j != i && risk.time[j] >= risk.time[i]) {
            let gap = z_base[i] - z_base[j];
            if !(gap > 0.0) {
                return Err(Error::Separability { event: i, other: j });
            }
            gamma = gamma.min(gap);
            k += 1;
        }
        rivals.push(k as f64);
    }
    t_grid
        .iter()
        .map(|&t| {
            let z = Array2::from_shape_fn((n, 1), |(i, _)| t * z_base[i]);
            let loss = deepsurv_loss(z.view(), risk)?.total;
            let bound = rivals
                .iter()
                .filter(|&&k| k > 0.0)
                .map(|&k| (k * (-t * gamma).exp()).ln_1p())
                .sum();
            Ok(ScalingPoint { t, loss, bound })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcHazardConstruction {
    #[serde(skip)]
    pub logits: Array2<f64>,
    pub loss: f64,
    /// `sum_{events} (1 + ln rho_i)`.
    pub infimum: f64,
    pub excess: f64,
    /// `eps' * (pre-event cells + sum of censored rho_i)`.
    pub predicted_excess: f64,
    /// `(at-risk cells) * eps' * (1 + max rho)`.
    pub bound: f64,
    pub pass: bool,
}

/// Hazard `eps'` on every at-risk cell except event cells, which get the
/// per-event minimiser `1 / rho_i`.
pub fn pchazard_construct(disc: &DiscretizedDataset, eps_prime: f64) -> Result<PcHazardConstruction> {
    if !(eps_prime > 0.0 && eps_prime.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps' must be positive, got {eps_prime}")));
    }
    let (n, m) = (disc.n(), disc.m());
    let low = inv_softplus(eps_prime);
    let mut logits = Array2::from_elem((n, m), low);
    let mut infimum = 0.0;
    let mut predicted = 0.0;
    let mut cells = 0usize;
    let mut max_rho = 0.0f64;
    for i in 0..n {
        let (j, rho) = (disc.interval_of[i], disc.rho_of[i]);
        cells += j + 1;
        max_rho = max_rho.max(rho);
        predicted += j as f64 * eps_prime;
        if disc.event[i] {
            logits[[i, j]] = inv_softplus(1.0 / rho);
            infimum += 1.0 + rho.ln();
        } else {
            predicted += rho * eps_prime;
        }
    }
    let loss = pchazard_loss(logits.view(), disc)?.total;
    let excess = loss - infimum;
    let bound = cells as f64 * eps_prime * (1.0 + max_rho);
    Ok(PcHazardConstruction {
        logits,
        loss,
        infimum,
        excess,
        predicted_excess: predicted,
        bound,
        pass: excess <= bound + ARITH_SLACK,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnetConstruction {
    #[serde(skip)]
    pub logits: Array2<f64>,
    pub loss: f64,
    pub cells: usize,
    /// `cells * e^{-t}`.
    pub bound: f64,
    pub pass: bool,
}

/// `+t` on event cells, `-t` on the other at-risk cells.
pub fn nnet_construct(disc: &DiscretizedDataset, t: f64) -> Result<NnetConstruction> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("t must be positive, got {t}")));
    }
    let (n, m) = (disc.n(), disc.m());
    let mut logits = Array2::zeros((n, m));
    let mut cells = 0usize;
    for i in 0..n {
        let j = disc.interval_of[i];
        for k in 0..=j {
            logits[[i, k]] = if k == j && disc.event[i] { t } else { -t };
            cells += 1;
        }
    }
    let loss = nnet_loss(logits.view(), disc)?.total;
    let bound = cells as f64 * (-t).exp();
    Ok(NnetConstruction {
        logits,
        loss,
        cells,
        bound,
        pass: loss <= bound + ARITH_SLACK,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmtlrConstruction {
    /// Base logits realising the cumulative targets.
    #[serde(skip)]
    pub logits: Array2<f64>,
    pub loss: f64,
    pub terms: Vec<f64>,
    /// `ln(1 + (m-1) e^{-2t})` for events, `ln(1 + h/(m-h) e^{-2t})` for a
    /// censored subject with `h` head intervals.
    pub bounds: Vec<f64>,
    pub pass: bool,
}

/// Cumulative scores `+t` on the event interval and `-t` elsewhere; censored
/// subjects get `-t` up to their interval and `+t` beyond. Base logits are
/// the successive differences `z_k = C_k - C_{k+1}`.
pub fn nmtlr_construct(disc: &DiscretizedDataset, t: f64) -> Result<NmtlrConstruction> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("t must be nonnegative, got {t}")));
    }
    let (n, m) = (disc.n(), disc.m());
    let mut logits = Array2::zeros((n, m));
    let mut bounds = Vec::with_capacity(n);
    let decay = (-2.0 * t).exp();
    for i in 0..n {
        let j = disc.interval_of[i];
        let c: Array1<f64> = if disc.event[i] {
            bounds.push(((m - 1) as f64 * decay).ln_1p());
            Array1::from_shape_fn(m, |k| if k == j { t } else { -t })
        } else {
            if j + 1 >= m {
                return Err(Error::TailDefinition(i));
            }
            let head = (j + 1) as f64;
            bounds.push((head / (m as f64 - head) * decay).ln_1p());
            Array1::from_shape_fn(m, |k| if k <= j { -t } else { t })
        };
        logits.row_mut(i).assign(&differences(c.view()));
    }
    let report = nmtlr_loss(logits.view(), disc)?;
    let pass = report
        .per_sample
        .iter()
        .zip(&bounds)
        .all(|(l, b)| *l <= b + ARITH_SLACK);
    Ok(NmtlrConstruction {
        logits,
        loss: report.total,
        terms: report.per_sample,
        bounds,
        pass,
    })
}

fn differences(c: ArrayView1<'_, f64>) -> Array1<f64> {
    let m = c.len();
    Array1::from_shape_fn(m, |k| if k + 1 < m { c[k] - c[k + 1] } else { c[k] })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeFit {
    pub loss: f64,
    pub infimum: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Minimise the PC-Hazard loss over unconstrained logits with Adam and a
/// decaying step. The short second-moment memory keeps steps from stalling
/// while the gradients of the vanishing cells decay exponentially.
pub fn pchazard_free_fit(disc: &DiscretizedDataset, iterations: usize) -> Result<FreeFit> {
    let (n, m) = (disc.n(), disc.m());
    let mut z = Array2::<f64>::zeros((n, m));
    let base = 0.1;
    let cfg = AdamConfig {
        lr: base,
        beta2: 0.9,
        ..AdamConfig::default()
    };
    let mut opt = Adam::with_len(cfg, n * m);
    for k in 0..iterations {
        let report = pchazard_loss(z.view(), disc)?;
        opt.config.lr = base / (1.0 + k as f64 / 500.0).sqrt();
        let grad = report.grad.as_slice().expect("standard layout").to_vec();
        opt.step_slice(z.as_slice_mut().expect("standard layout"), &grad);
    }
    let loss = pchazard_loss(z.view(), disc)?.total;
    let infimum: f64 = (0..n)
        .filter(|&i| disc.event[i])
        .map(|i| 1.0 + disc.rho_of[i].ln())
        .sum();
    Ok(FreeFit {
        loss,
        infimum,
        gap: loss - infimum,
        iterations,
    })
}
