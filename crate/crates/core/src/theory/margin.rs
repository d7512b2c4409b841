use ndarray::{s, Array2, ArrayView1, ArrayView2};

use super::{BoundCheck, MarginReport};
use crate::net::{spectral_norm, Layer, MlpParams};
use crate::survloss::{deepsurv_loss, LossKind, Targets};
use crate::{Error, Result};

pub const DEFAULT_EPS_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-6];

/// Minimal model-specific margin: risk-set separation for DeepSurv,
/// within-subject separation of the event interval otherwise (on cumulative
/// scores for N-MTLR).
pub fn measure_margin(logits: ArrayView2<'_, f64>, targets: &Targets, kind: LossKind) -> Result<MarginReport> {
    let mut best: Option<(f64, usize, usize)> = None;
    let mut offer = |g: f64, i: usize, r: usize| {
        if best.is_none_or(|(b, _, _)| g < b) {
            best = Some((g, i, r));
        }
    };
    match (kind, targets) {
        (LossKind::DeepSurv, Targets::Risk(risk)) => {
            let z = logits.column(0);
            for i in (0..risk.time.len()).filter(|&i| risk.event[i]) {
                for j in 0..risk.time.len() {
                    if j != i && risk.time[j] >= risk.time[i] {
                        offer(z[i] - z[j], i, j);
                    }
                }
            }
        }
        (k, Targets::Intervals(disc)) if k.is_interval() => {
            for i in (0..disc.n()).filter(|&i| disc.event[i]) {
                let row = if k == LossKind::Nmtlr {
                    suffix_sums(logits.row(i))
                } else {
                    logits.row(i).to_vec()
                };
                let j = disc.interval_of[i];
                for (l, v) in row.iter().enumerate().filter(|&(l, _)| l != j) {
                    offer(row[j] - v, i, l);
                }
            }
        }
        (k, _) => return Err(Error::Unsupported(format!("{k} margin with mismatched targets"))),
    }
    let (gamma, subject, rival) = best.ok_or(Error::UndefinedMargin)?;
    Ok(MarginReport {
        kind,
        gamma,
        subject,
        rival,
        epsilon: None,
    })
}

fn suffix_sums(z: ArrayView1<'_, f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = z
        .iter()
        .rev()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    c.reverse();
    c
}

/// The margin a DeepSurv fit must carry once its loss excess is at most `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonMargin {
    pub margin: MarginReport,
    pub excess: f64,
    /// `ln(1/epsilon) - ln 2`.
    pub required: f64,
    pub check: BoundCheck,
}

pub fn epsilon_margin_deepsurv(logits: ArrayView2<'_, f64>, targets: &Targets, epsilon: f64) -> Result<EpsilonMargin> {
    let ln2 = std::f64::consts::LN_2;
    if !(epsilon > 0.0 && epsilon <= ln2) {
        return Err(Error::OutOfRegime(epsilon));
    }
    let Targets::Risk(risk) = targets else {
        return Err(Error::Unsupported("epsilon margin needs DeepSurv risk sets".into()));
    };
    let excess = deepsurv_loss(logits, risk)?.total;
    if excess > epsilon {
        return Err(Error::InvalidConfig(format!(
            "loss excess {excess} exceeds epsilon {epsilon}"
        )));
    }
    let mut margin = measure_margin(logits, targets, LossKind::DeepSurv)?;
    margin.epsilon = Some(epsilon);
    let required = (1.0 / epsilon).ln() - ln2;
    Ok(EpsilonMargin {
        margin,
        excess,
        required,
        check: BoundCheck::new(margin.gamma, required),
    })
}

/// Compare the readout norm with the lower bound implied by its margin on the
/// given embeddings.
///
/// DeepSurv: `||W|| >= gamma / max ||f_i - f_j||` over comparable pairs.
/// Interval models: `||[W | b]|| >= gamma / (sqrt 2 * max ||(f_i, 1)||)` over
/// events, with `[W | b]` premultiplied by the suffix-sum map for N-MTLR.
pub fn margin_budget_check(
    readout: &Layer,
    embedding: ArrayView2<'_, f64>,
    targets: &Targets,
    kind: LossKind,
) -> Result<BoundCheck> {
    if embedding.ncols() != readout.in_dim() || embedding.nrows() != targets.n() {
        return Err(Error::DimensionMismatch(format!(
            "embedding {:?} vs readout {}x{} and {} targets",
            embedding.dim(),
            readout.in_dim(),
            readout.out_dim(),
            targets.n()
        )));
    }
    let mut logits = embedding.dot(&readout.weight);
    logits += &readout.bias;
    let margin = measure_margin(logits.view(), targets, kind)?;
    if !(margin.gamma > 0.0) {
        return Err(Error::NoMargin(margin.gamma));
    }
    let gamma = margin.gamma;
    let event = targets.event();
    match targets {
        Targets::Risk(risk) => {
            let mut widest = 0.0f64;
            for i in (0..risk.time.len()).filter(|&i| event[i]) {
                for j in (0..risk.time.len()).filter(|&j| j != i && risk.time[j] >= risk.time[i]) {
                    let d = &embedding.row(i) - &embedding.row(j);
                    widest = widest.max(d.dot(&d).sqrt());
                }
            }
            Ok(BoundCheck::new(spectral_norm(readout.weight.t()), gamma / widest))
        }
        Targets::Intervals(_) => {
            let augmented = augmented_readout(readout, kind == LossKind::Nmtlr);
            let reach = (0..embedding.nrows())
                .filter(|&i| event[i])
                .map(|i| {
                    let f = embedding.row(i);
                    (f.dot(&f) + 1.0).sqrt()
                })
                .fold(0.0f64, f64::max);
            Ok(BoundCheck::new(
                spectral_norm(augmented.view()),
                gamma / (std::f64::consts::SQRT_2 * reach),
            ))
        }
    }
}

/// `[W | b]` as a `q x (u + 1)` matrix, rows replaced by suffix sums when
/// `cumulative`.
fn augmented_readout(readout: &Layer, cumulative: bool) -> Array2<f64> {
    let (u, q) = readout.weight.dim();
    let mut a = Array2::zeros((q, u + 1));
    a.slice_mut(s![.., ..u]).assign(&readout.weight.t());
    a.column_mut(u).assign(&readout.bias);
    if cumulative {
        for k in (0..q.saturating_sub(1)).rev() {
            let next = a.row(k + 1).to_owned();
            let mut row = a.row_mut(k);
            row += &next;
        }
    }
    a
}

/// [`margin_budget_check`] on the embedding a network produces for `x`.
pub fn budget_check_network(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    targets: &Targets,
    kind: LossKind,
) -> Result<BoundCheck> {
    let fwd = params.forward(x)?;
    margin_budget_check(params.readout(), fwd.embedding.view(), targets, kind)
}
