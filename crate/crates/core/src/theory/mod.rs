//! Numerical checks of the interpolation constructions, the infimum
//! formulas and the margin-norm lower bounds.
//!
//! Bounds here are evaluated with their own arithmetic and never call into
//! the loss implementations they are compared with.

mod construct;
mod margin;
mod verify;

#[cfg(test)]
mod tests;

pub use construct::{
    deepsurv_scaling_path, nmtlr_construct, nnet_construct, pchazard_construct, pchazard_free_fit, FreeFit,
    NmtlrConstruction, NnetConstruction, PcHazardConstruction, ScalingPoint, DEFAULT_T_GRID,
};
pub use margin::{
    budget_check_network, epsilon_margin_deepsurv, margin_budget_check, measure_margin, EpsilonMargin, DEFAULT_EPS_GRID,
};
pub use verify::{run_suite, CheckRecord, Relation, Suite};

use serde::Serialize;

use crate::survloss::LossKind;

/// Arithmetic slack allowed when a lower bound is compared with a norm.
pub const BOUND_SLACK: f64 = 1e-9;
/// Slack allowed when a constructed loss is compared with its closed-form bound.
pub const ARITH_SLACK: f64 = 1e-12;

/// Smallest logit margin of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    pub kind: LossKind,
    pub gamma: f64,
    /// Event subject attaining the minimum.
    pub subject: usize,
    /// Competing subject (DeepSurv) or competing interval (interval models).
    pub rival: usize,
    /// Loss excess the margin was measured at, if any.
    pub epsilon: Option<f64>,
}

/// `lhs >= rhs` up to [`BOUND_SLACK`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            lhs,
            rhs,
            slack,
            pass: slack >= -BOUND_SLACK,
        }
    }
}
