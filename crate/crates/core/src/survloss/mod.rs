//! Survival losses over network logits.
//!
//! Each loss maps an `n x q` logit matrix (`q = 1` for DeepSurv, `q = m`
//! intervals otherwise) to a [`LossReport`] holding the raw summed loss,
//! per-sample terms, the exact gradient with respect to the logits and the
//! model's minimal logit margin. All exp/log compositions go through the
//! stabilised helpers in [`numerics`], so logits far into the saturated
//! regime stay finite.

mod deepsurv;
pub mod gradcheck;
mod nmtlr;
mod nnet;
pub mod numerics;
mod pchazard;
mod risk;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use deepsurv::{deepsurv_loss, deepsurv_true_npll, TrueNpll};
pub use nmtlr::{cumulative_scores, nmtlr_loss, nmtlr_probabilities};
pub use nnet::nnet_loss;
pub use pchazard::{pchazard_infimum, pchazard_loss};
pub use risk::RiskSetIndex;

use crate::datagen::{DiscretizedDataset, Grid, GridScheme, SurvivalData};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    DeepSurv,
    PcHazard,
    Nnet,
    Nmtlr,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::DeepSurv, LossKind::PcHazard, LossKind::Nnet, LossKind::Nmtlr];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::DeepSurv => "deepsurv",
            LossKind::PcHazard => "pchazard",
            LossKind::Nnet => "nnet",
            LossKind::Nmtlr => "nmtlr",
        }
    }

    pub fn is_interval(self) -> bool {
        self != LossKind::DeepSurv
    }

    /// Interval count used in the reference experiments.
    pub fn default_intervals(self) -> usize {
        match self {
            LossKind::DeepSurv => 1,
            LossKind::PcHazard => 50,
            LossKind::Nnet | LossKind::Nmtlr => 20,
        }
    }

    /// N-MTLR needs an interval beyond every observation.
    pub fn needs_tail_interval(self) -> bool {
        self == LossKind::Nmtlr
    }

    pub fn output_dim(self, m: usize) -> usize {
        if self.is_interval() {
            m
        } else {
            1
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deepsurv" => Ok(LossKind::DeepSurv),
            "pchazard" => Ok(LossKind::PcHazard),
            "nnet" => Ok(LossKind::Nnet),
            "nmtlr" => Ok(LossKind::Nmtlr),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss kind {other:?} (expected deepsurv | pchazard | nnet | nmtlr)"
            ))),
        }
    }
}

/// Loss value, per-sample terms, logit gradient and minimal margin.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    /// Raw summed loss.
    pub total: f64,
    pub per_sample: Vec<f64>,
    pub grad: Array2<f64>,
    /// Minimal model-specific logit margin; `None` without event subjects.
    pub margin: Option<f64>,
}

impl LossReport {
    fn new(per_sample: Vec<f64>, grad: Array2<f64>, margin: Option<f64>) -> Self {
        Self {
            total: per_sample.iter().sum(),
            per_sample,
            grad,
            margin,
        }
    }

    /// Loss per subject.
    pub fn mean(&self) -> f64 {
        self.total / self.per_sample.len().max(1) as f64
    }

    /// Loss per observed event.
    pub fn per_event(&self, event: &[bool]) -> f64 {
        self.total / event.iter().filter(|&&e| e).count().max(1) as f64
    }
}

/// What a loss needs besides the logits.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Risk(RiskSetIndex),
    Intervals(DiscretizedDataset),
}

impl Targets {
    /// Targets for `kind` on `data`; interval models use `grid`.
    pub fn build(kind: LossKind, data: &SurvivalData, grid: Option<&Grid>) -> Result<Self> {
        if kind.is_interval() {
            let grid = grid.ok_or_else(|| Error::InvalidConfig(format!("{kind} needs an interval grid")))?;
            Ok(Targets::Intervals(DiscretizedDataset::assign(
                grid,
                &data.time,
                &data.event,
            )?))
        } else {
            Ok(Targets::Risk(RiskSetIndex::new(&data.time, &data.event)))
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Targets::Risk(r) => r.n(),
            Targets::Intervals(d) => d.n(),
        }
    }

    pub fn event(&self) -> &[bool] {
        match self {
            Targets::Risk(r) => &r.event,
            Targets::Intervals(d) => &d.event,
        }
    }

    /// Rows `idx`; risk sets are rebuilt within the subset.
    pub fn subset(&self, idx: &[usize]) -> Self {
        match self {
            Targets::Risk(r) => Targets::Risk(r.subset(idx)),
            Targets::Intervals(d) => Targets::Intervals(d.subset(idx)),
        }
    }
}

/// Default grid for an interval model over the observed times.
pub fn default_grid(kind: LossKind, time: &[f64], m: usize) -> Result<Grid> {
    Grid::build(time, m, GridScheme::Equidistant, kind.needs_tail_interval())
}

pub fn evaluate(kind: LossKind, logits: ArrayView2<'_, f64>, targets: &Targets) -> Result<LossReport> {
    match (kind, targets) {
        (LossKind::DeepSurv, Targets::Risk(r)) => deepsurv_loss(logits, r),
        (LossKind::PcHazard, Targets::Intervals(d)) => pchazard_loss(logits, d),
        (LossKind::Nnet, Targets::Intervals(d)) => nnet_loss(logits, d),
        (LossKind::Nmtlr, Targets::Intervals(d)) => nmtlr_loss(logits, d),
        (k, _) => Err(Error::Unsupported(format!("{k} loss with mismatched targets"))),
    }
}

/// Infimum of the raw loss over free logits.
pub fn infimum(kind: LossKind, targets: &Targets) -> Result<f64> {
    match (kind, targets) {
        (LossKind::PcHazard, Targets::Intervals(d)) => pchazard_infimum(d),
        _ => Ok(0.0),
    }
}

fn check_finite(logits: ArrayView2<'_, f64>) -> Result<()> {
    for (i, row) in logits.rows().into_iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                what: format!("logit {v}"),
            });
        }
    }
    Ok(())
}

fn check_interval_logits(logits: ArrayView2<'_, f64>, disc: &DiscretizedDataset) -> Result<()> {
    if logits.dim() != (disc.n(), disc.m()) {
        return Err(Error::DimensionMismatch(format!(
            "expected {}x{} logits, got {:?}",
            disc.n(),
            disc.m(),
            logits.dim()
        )));
    }
    Ok(())
}

/// `min_{events} z_{j(i)} - max_{k != j(i)} z_k`.
fn interval_margin(logits: ArrayView2<'_, f64>, disc: &DiscretizedDataset) -> Option<f64> {
    let mut margin: Option<f64> = None;
    for i in (0..disc.n()).filter(|&i| disc.event[i]) {
        let j = disc.interval_of[i];
        let row = logits.row(i);
        let other = row
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mi = row[j] - other;
        margin = Some(margin.map_or(mi, |g: f64| g.min(mi)));
    }
    margin
}
