use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::survloss::LossKind;
use crate::{Error, Result};

/// Per-width summary: replicate means per (lr, batch) cell, then the median
/// over cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub width: usize,
    pub d: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub w_norm: f64,
    pub margin: f64,
    pub z_norm_deviation: f64,
    pub init_train_loss: f64,
    pub train_infimum: f64,
    /// (lr, batch) cells with at least one finished replicate.
    pub cells: usize,
    pub rows: usize,
    pub diverged: usize,
    /// Every run at this width diverged; values are NaN.
    pub gap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub model: LossKind,
    pub points: Vec<CurvePoint>,
    pub diverged: usize,
    /// Widths where some adjacent wider point has a higher train loss by more than 1e-3.
    pub monotonicity_violations: Vec<usize>,
}

/// Median with the midpoint convention for even counts; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Median over cells of the replicate mean of `field`, skipping cells with no values.
fn summarise(cells: &[Vec<&SweepRow>], field: impl Fn(&SweepRow) -> Option<f64>) -> f64 {
    let per_cell: Vec<f64> = cells
        .iter()
        .filter_map(|reps| mean(reps.iter().filter_map(|r| field(r))))
        .collect();
    median(&per_cell)
}

pub fn aggregate(rows: &[SweepRow]) -> Result<Aggregate> {
    let model = rows
        .first()
        .ok_or_else(|| Error::InvalidConfig("no rows to aggregate".into()))?
        .model;
    if let Some(r) = rows.iter().find(|r| r.model != model) {
        return Err(Error::InvalidConfig(format!("rows mix models {model} and {}", r.model)));
    }
    let mut by_width: BTreeMap<usize, BTreeMap<(u64, usize), Vec<&SweepRow>>> = BTreeMap::new();
    for r in rows {
        by_width
            .entry(r.width)
            .or_default()
            .entry((r.lr.to_bits(), r.batch))
            .or_default()
            .push(r);
    }
    let mut points = Vec::with_capacity(by_width.len());
    for (width, grid) in by_width {
        let all: Vec<&SweepRow> = grid.values().flatten().copied().collect();
        let diverged = all.iter().filter(|r| r.diverged).count();
        let cells: Vec<Vec<&SweepRow>> = grid
            .into_values()
            .map(|reps| reps.into_iter().filter(|r| !r.diverged).collect::<Vec<_>>())
            .filter(|reps| !reps.is_empty())
            .collect();
        points.push(CurvePoint {
            width,
            d: all[0].d,
            train_loss: summarise(&cells, |r| Some(r.train_loss)),
            test_loss: summarise(&cells, |r| Some(r.test_loss)),
            w_norm: summarise(&cells, |r| Some(r.w_norm)),
            margin: summarise(&cells, |r| r.margin),
            z_norm_deviation: summarise(&cells, |r| r.z_norm_deviation),
            init_train_loss: summarise(&cells, |r| Some(r.init_train_loss)),
            train_infimum: median(&all.iter().map(|r| r.train_infimum).collect::<Vec<_>>()),
            cells: cells.len(),
            rows: all.len(),
            diverged,
            gap: cells.is_empty(),
        });
    }
    let finite: Vec<&CurvePoint> = points.iter().filter(|p| !p.gap).collect();
    let monotonicity_violations = finite
        .windows(2)
        .filter(|w| w[1].train_loss > w[0].train_loss + 1e-3)
        .map(|w| w[1].width)
        .collect();
    Ok(Aggregate {
        model,
        diverged: points.iter().map(|p| p.diverged).sum(),
        points,
        monotonicity_violations,
    })
}

/// Smallest width whose train loss is within `tol` of `infimum`.
pub fn detect_threshold(curve: &[CurvePoint], infimum: f64, tol: f64) -> Option<usize> {
    curve
        .iter()
        .filter(|p| !p.gap)
        .find(|p| p.train_loss <= infimum + tol)
        .map(|p| p.width)
}

/// Threshold of a curve against its own recorded infimum, with
/// [`threshold_tolerance`].
pub fn curve_threshold(curve: &[CurvePoint]) -> Option<usize> {
    let inf: Vec<f64> = curve.iter().map(|p| p.train_infimum).collect();
    detect_threshold(curve, median(&inf), threshold_tolerance(curve))
}

/// `0.05 x` the median initial train loss over the curve.
pub fn threshold_tolerance(curve: &[CurvePoint]) -> f64 {
    let init: Vec<f64> = curve.iter().filter(|p| !p.gap).map(|p| p.init_train_loss).collect();
    0.05 * median(&init)
}
