//! Numerical laboratory for interpolation in neural survival models.
//!
//! The crate is organised as five layers, each usable on its own:
//!
//! - [`datagen`]: right-censored Weibull data with AR(1) covariates and a
//!   sparse indicator log-hazard, plus interval discretization.
//! - [`survloss`]: the DeepSurv partial likelihood, PC-Hazard, Nnet-Survival
//!   and N-MTLR losses with analytic logit gradients and infimum oracles.
//! - [`net`]: a one-hidden-layer shared-embedding MLP, reverse-mode
//!   gradients through any of the losses, Adam and a plateau-stopped
//!   training loop.
//! - [`theory`]: constructive checks of the interpolation results (scaling
//!   paths, explicit logit constructions, infimum formulas) and the
//!   margin / operator-norm lower bounds.
//! - [`sweep`]: capacity sweeps over network width, replicate aggregation,
//!   interpolation-threshold detection, CSV persistence and SVG curves.
//!
//! All randomness flows from explicit `u64` seeds through ChaCha8 streams,
//! so every dataset, initialisation and training trajectory is reproducible.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod net;
pub mod rng;
pub mod survloss;
pub mod sweep;
pub mod theory;

pub use error::{Error, Result};
pub use survloss::LossKind;
