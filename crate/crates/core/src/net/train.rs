use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{spectral_norm, Adam, AdamConfig, MlpParams};
use crate::rng::seeded;
use crate::survloss::{evaluate, LossKind, LossReport, Targets};
use crate::{Error, Result};

/// How DeepSurv risk sets are formed during optimisation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    /// Risk sets restricted to the members of each mini-batch.
    #[default]
    BatchLocal,
    /// One batch holding the whole training set.
    FullBatch,
}

impl RiskMode {
    pub fn name(self) -> &'static str {
        match self {
            RiskMode::BatchLocal => "batch_local",
            RiskMode::FullBatch => "full_batch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_epochs: usize,
    /// Plateau window `E` in epochs.
    pub window: usize,
    /// Stop once `(best[k-E] - best[k]) / max(|best[k-E]|, scale_floor)` drops below this.
    pub rel_threshold: f64,
    pub scale_floor: f64,
    pub seed: u64,
    pub risk_mode: RiskMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            lr: adam.lr,
            batch_size: 64,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            max_epochs: 2000,
            window: 20,
            rel_threshold: 1e-4,
            scale_floor: 1e-2,
            seed: 0,
            risk_mode: RiskMode::BatchLocal,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and nonnegative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("adam eps must be positive");
        }
        if self.window == 0 || self.max_epochs == 0 {
            return bad("window and max_epochs must be positive");
        }
        if !(self.rel_threshold > 0.0 && self.rel_threshold < 1.0) {
            return bad("rel_threshold must lie in (0, 1)");
        }
        if !(self.scale_floor > 0.0) {
            return bad("scale_floor must be positive");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Covariates paired with loss targets.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub x: Array2<f64>,
    pub targets: Targets,
}

impl LabeledSet {
    pub fn new(x: Array2<f64>, targets: Targets) -> Result<Self> {
        if x.nrows() != targets.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows for {} targets",
                x.nrows(),
                targets.n()
            )));
        }
        Ok(Self { x, targets })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            targets: self.targets.subset(idx),
        }
    }
}

/// Loss on a batch and the gradient of its raw total w.r.t. every parameter.
pub fn loss_grad(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    targets: &Targets,
    kind: LossKind,
) -> Result<(LossReport, MlpParams)> {
    let tape = params.record(x)?;
    let report = evaluate(kind, tape.logits.view(), targets)?;
    if let Some(index) = report.per_sample.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index,
            what: "loss".into(),
        });
    }
    let grad = params.backward(&tape, &report.grad);
    Ok((report, grad))
}

/// Full-set evaluation of a fitted network.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: LossReport,
    pub logits: Array2<f64>,
    pub embedding: Array2<f64>,
}

pub fn evaluate_set(params: &MlpParams, set: &LabeledSet, kind: LossKind) -> Result<Evaluation> {
    let fwd = params.forward(set.x.view())?;
    let report = evaluate(kind, fwd.logits.view(), &set.targets)?;
    Ok(Evaluation {
        report,
        logits: fwd.logits,
        embedding: fwd.embedding,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest recorded train loss.
    pub params: MlpParams,
    /// Per-sample train loss on the full training set, entry 0 before any update.
    pub trace: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch at which the plateau rule fired; `None` when the epoch cap was hit.
    pub converged_epoch: Option<usize>,
    pub diverged: bool,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub final_train_loss_raw: f64,
    pub final_test_loss: Option<f64>,
    pub w_norm: f64,
    pub max_embedding_norm: f64,
    pub margin: Option<f64>,
    pub risk_mode: RiskMode,
}

fn plateaued(best: &[f64], cfg: &TrainConfig) -> bool {
    let k = best.len() - 1;
    if k < cfg.window {
        return false;
    }
    let old = best[k - cfg.window];
    let gain = (old - best[k]) / old.abs().max(cfg.scale_floor);
    gain < cfg.rel_threshold
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. })
}

/// Mini-batch Adam until the windowed best train loss stops improving.
pub fn train(
    mut params: MlpParams,
    data_train: &LabeledSet,
    data_test: Option<&LabeledSet>,
    kind: LossKind,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = data_train.n();
    if n == 0 {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let batch = match (kind, cfg.risk_mode) {
        (LossKind::DeepSurv, RiskMode::FullBatch) => n,
        _ => cfg.batch_size.min(n),
    };
    let mut rng = seeded(cfg.seed);
    let mut opt = Adam::new(cfg.adam(), &params);
    let mut order: Vec<usize> = (0..n).collect();

    let initial = evaluate_set(&params, data_train, kind)?.report.mean();
    let mut trace = vec![initial];
    let mut best = vec![initial];
    let mut best_params = params.clone();
    let mut converged_epoch = None;
    let mut diverged = !initial.is_finite();

    let mut epoch = 0;
    while !diverged && epoch < cfg.max_epochs {
        epoch += 1;
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let sub = data_train.subset(chunk);
            match loss_grad(&params, sub.x.view(), &sub.targets, kind) {
                Ok((_, mut grad)) => {
                    let scale = 1.0 / chunk.len() as f64;
                    grad.values_mut().for_each(|g| *g *= scale);
                    opt.step(&mut params, &grad);
                }
                Err(e) if is_divergence(&e) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if diverged || !params.is_finite() {
            diverged = true;
            break;
        }
        let loss = match evaluate_set(&params, data_train, kind) {
            Ok(ev) => ev.report.mean(),
            Err(e) if is_divergence(&e) => f64::NAN,
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        trace.push(loss);
        let prev = *best.last().expect("seeded with initial loss");
        if loss < prev {
            best_params = params.clone();
        }
        best.push(prev.min(loss));
        if plateaued(&best, cfg) {
            converged_epoch = Some(epoch);
            break;
        }
    }

    if diverged {
        return Ok(TrainOutcome {
            params,
            trace,
            epochs_run: epoch,
            converged_epoch: None,
            diverged,
            initial_train_loss: initial,
            final_train_loss: f64::NAN,
            final_train_loss_raw: f64::NAN,
            final_test_loss: data_test.map(|_| f64::NAN),
            w_norm: f64::NAN,
            max_embedding_norm: f64::NAN,
            margin: None,
            risk_mode: cfg.risk_mode,
        });
    }

    let ev = evaluate_set(&best_params, data_train, kind)?;
    let final_test_loss = data_test
        .map(|t| evaluate_set(&best_params, t, kind).map(|e| e.report.mean()))
        .transpose()?;
    let max_embedding_norm = ev
        .embedding
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max);
    Ok(TrainOutcome {
        w_norm: spectral_norm(best_params.readout().weight.t()),
        params: best_params,
        trace,
        epochs_run: epoch,
        converged_epoch,
        diverged,
        initial_train_loss: initial,
        final_train_loss: ev.report.mean(),
        final_train_loss_raw: ev.report.total,
        final_test_loss,
        max_embedding_norm,
        margin: ev.report.margin,
        risk_mode: cfg.risk_mode,
    })
}
