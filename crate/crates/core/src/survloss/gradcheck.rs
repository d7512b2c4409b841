//! Central-difference checks of the analytic logit gradients.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{default_grid, evaluate, LossKind, Targets};
use crate::datagen::DiscretizedDataset;
use crate::rng::seeded;
use crate::Result;

/// Denominator floor of the relative error; below it errors are absolute.
pub const REL_ERR_FLOOR: f64 = 1e-2;

/// `|a - b| / max(|a|, |b|, REL_ERR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// A small random loss evaluation problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: LossKind,
    pub logits: Array2<f64>,
    pub targets: Targets,
}

impl Instance {
    /// `n` subjects with times on a 0.01 lattice (so ties occur), roughly
    /// 60% events, `m` intervals for interval models and N(0, 1.5^2) logits.
    pub fn random(kind: LossKind, n: usize, m: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let time: Vec<f64> = (0..n).map(|_| (rng.random_range(1..=100) as f64) / 100.0).collect();
        let event: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let targets = if kind.is_interval() {
            let grid = default_grid(kind, &time, m)?;
            Targets::Intervals(DiscretizedDataset::assign(&grid, &time, &event)?)
        } else {
            Targets::Risk(super::RiskSetIndex::new(&time, &event))
        };
        let q = kind.output_dim(m);
        let normal = Normal::new(0.0, 1.5).expect("valid normal");
        let logits = Array2::from_shape_fn((n, q), |_| normal.sample(&mut rng));
        Ok(Self { kind, logits, targets })
    }
}

/// Worst relative error between the analytic gradient and central
/// differences with step `h`.
pub fn grad_check(kind: LossKind, logits: &Array2<f64>, targets: &Targets, h: f64) -> Result<f64> {
    let analytic = evaluate(kind, logits.view(), targets)?.grad;
    let mut probe = logits.clone();
    let mut worst = 0.0f64;
    for idx in ndarray::indices(logits.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = evaluate(kind, probe.view(), targets)?.total;
        probe[idx] = orig - h;
        let down = evaluate(kind, probe.view(), targets)?.total;
        probe[idx] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(relative_error(analytic[idx], numeric));
    }
    Ok(worst)
}

/// Directional derivative of the total loss along `dir`, by central
/// differences.
pub fn directional_derivative(
    kind: LossKind,
    logits: &Array2<f64>,
    dir: &Array2<f64>,
    targets: &Targets,
    h: f64,
) -> Result<f64> {
    let up = logits + &(dir * h);
    let down = logits - &(dir * h);
    Ok((evaluate(kind, up.view(), targets)?.total - evaluate(kind, down.view(), targets)?.total) / (2.0 * h))
}
