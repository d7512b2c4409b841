//! Synthetic right-censored survival data.
//!
//! Covariates are AR(1)-correlated Gaussians, the true log-hazard is a
//! scaled sum of indicator effects over a sparse support, event times are
//! Weibull with that log-hazard, and observations are censored by an
//! independent uniform censoring time and an administrative cutoff.

mod discretize;
mod io;

pub use discretize::{discretize, DiscretizedDataset, Grid, GridScheme};
pub use io::{read_dataset_csv, write_dataset, DatasetSidecar};

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub n: usize,
    pub p: usize,
    /// Number of covariates with a nonzero effect.
    pub s: usize,
    /// AR(1) correlation between adjacent covariates.
    pub rho: f64,
    /// Coefficients on the support are drawn from `Unif(-beta_range, beta_range)`.
    pub beta_range: f64,
    /// Multiplier applied to the indicator sum.
    pub scale: f64,
    /// Weibull shape.
    pub gamma: f64,
    /// Censoring times are `Unif(0, cens_hi)`.
    pub cens_hi: f64,
    /// Administrative cutoff.
    pub tau: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self::reference(200)
    }
}

impl GenConfig {
    /// The simulation setting with `p` covariates (200 for the interval
    /// models, 60 for DeepSurv).
    pub fn reference(p: usize) -> Self {
        Self {
            n: 3500,
            p,
            s: 50,
            rho: 0.6,
            beta_range: 0.5,
            scale: 0.31,
            gamma: 0.7,
            cens_hi: 0.8,
            tau: 0.6,
            seed: 20_251_016,
        }
    }

    /// Laptop-sized variant used by the desk sweep.
    pub fn desk() -> Self {
        Self {
            n: 400,
            p: 30,
            s: 10,
            ..Self::reference(30)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 1 {
            return fail("n must be at least 1".into());
        }
        if self.s < 1 || self.s > self.p {
            return fail(format!("need 1 <= s <= p, got s={} p={}", self.s, self.p));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.gamma > 0.0) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.cens_hi > 0.0) {
            return fail(format!("cens_hi must be positive, got {}", self.cens_hi));
        }
        if !(self.beta_range >= 0.0) || !self.scale.is_finite() {
            return fail("beta_range must be nonnegative and scale finite".into());
        }
        Ok(())
    }
}

/// One subject: covariates, observed time `Y` and event flag `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub x: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

/// Column-oriented survival sample; row `i` is subject `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalData {
    pub x: Array2<f64>,
    pub time: Vec<f64>,
    pub event: Vec<bool>,
}

impl SurvivalData {
    pub fn new(x: Array2<f64>, time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        if x.nrows() != time.len() || time.len() != event.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows, {} times, {} event flags",
                x.nrows(),
                time.len(),
                event.len()
            )));
        }
        if let Some(i) = time.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Domain(format!(
                "time of subject {i} must be finite and nonnegative, got {}",
                time[i]
            )));
        }
        Ok(Self { x, time, event })
    }

    pub fn from_records(records: &[SurvivalRecord]) -> Result<Self> {
        let p = records.first().map_or(0, |r| r.x.len());
        let mut flat = Vec::with_capacity(records.len() * p);
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "record {i} has {} covariates, expected {p}",
                    r.x.len()
                )));
            }
            flat.extend_from_slice(&r.x);
        }
        let x =
            Array2::from_shape_vec((records.len(), p), flat).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(
            x,
            records.iter().map(|r| r.time).collect(),
            records.iter().map(|r| r.event).collect(),
        )
    }

    pub fn records(&self) -> impl Iterator<Item = SurvivalRecord> + '_ {
        self.x
            .rows()
            .into_iter()
            .zip(self.time.iter().zip(&self.event))
            .map(|(row, (&time, &event))| SurvivalRecord {
                x: row.to_vec(),
                time,
                event,
            })
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    pub fn censoring_fraction(&self) -> f64 {
        1.0 - self.n_events() as f64 / self.len().max(1) as f64
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(ndarray::Axis(0), idx),
            time: idx.iter().map(|&i| self.time[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
        }
    }
}

/// Data-generating truth behind a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
    pub scale: f64,
    /// True log-hazard of every subject.
    pub eta: Vec<f64>,
    /// `sqrt(mean(eta^2))`.
    pub eta_rms: f64,
    /// `sqrt(sum(eta^2))`; equals `eta_rms * sqrt(n)`.
    pub eta_l2: f64,
}

impl GroundTruth {
    fn new(beta: Vec<f64>, support: Vec<usize>, scale: f64, eta: Vec<f64>) -> Self {
        let (eta_rms, eta_l2) = norms(&eta);
        Self {
            beta,
            support,
            scale,
            eta,
            eta_rms,
            eta_l2,
        }
    }

    /// Restrict the per-subject quantities to rows `idx`.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self::new(
            self.beta.clone(),
            self.support.clone(),
            self.scale,
            idx.iter().map(|&i| self.eta[i]).collect(),
        )
    }
}

/// `(rms, l2)` of a vector.
pub fn norms(v: &[f64]) -> (f64, f64) {
    let ss: f64 = v.iter().map(|e| e * e).sum();
    let l2 = ss.sqrt();
    let rms = if v.is_empty() {
        0.0
    } else {
        (ss / v.len() as f64).sqrt()
    };
    (rms, l2)
}

/// A generated sample together with its truth.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub config: GenConfig,
    pub data: SurvivalData,
    pub truth: GroundTruth,
    pub censoring_fraction: f64,
}

/// Gaussian rows with covariance `rho^|k-l|`, via the AR(1) recursion
/// `x_k = rho x_{k-1} + sqrt(1 - rho^2) e_k`.
pub fn sample_covariates(n: usize, p: usize, rho: f64, rng: &mut Rng) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("rho must lie in [0, 1), got {rho}")));
    }
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        let mut prev = 0.0;
        for (k, v) in row.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(rng);
            prev = if k == 0 { e } else { rho * prev + innov * e };
            *v = prev;
        }
    }
    Ok(x)
}

/// Sparse coefficients: `s` support indices drawn without replacement,
/// values uniform on `(-half_width, half_width)`.
pub fn make_coefficients(p: usize, s: usize, half_width: f64, rng: &mut Rng) -> Result<(Vec<f64>, Vec<usize>)> {
    if s > p {
        return Err(Error::InvalidConfig(format!("s={s} exceeds p={p}")));
    }
    let mut beta = vec![0.0; p];
    if s == 0 {
        return Ok((beta, Vec::new()));
    }
    let mut support = sample(rng, p, s).into_vec();
    support.sort_unstable();
    if half_width > 0.0 {
        let dist = Uniform::new(-half_width, half_width).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for &k in &support {
            beta[k] = dist.sample(rng);
        }
    }
    Ok((beta, support))
}

pub fn true_log_hazard(x: ArrayView1<'_, f64>, beta: &[f64], support: &[usize], scale: f64) -> f64 {
    scale * support.iter().filter(|&&k| x[k] > 0.0).map(|&k| beta[k]).sum::<f64>()
}

/// Weibull inversion `T = (-ln u / exp(eta))^(1/gamma)`.
pub fn sample_event_time(eta: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("u must lie in (0, 1), got {u}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok((-u.ln() / eta.exp()).powf(1.0 / gamma))
}

/// `(min(T, C, tau), T <= C && T <= tau)`.
pub fn apply_censoring(t: f64, c: f64, tau: f64) -> (f64, bool) {
    (t.min(c).min(tau), t <= c && t <= tau)
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<GeneratedDataset> {
    cfg.validate()?;
    let mut cov_rng = seeded(derive_seed(cfg.seed, "covariates"));
    let mut coef_rng = seeded(derive_seed(cfg.seed, "coefficients"));
    let mut time_rng = seeded(derive_seed(cfg.seed, "times"));

    let x = sample_covariates(cfg.n, cfg.p, cfg.rho, &mut cov_rng)?;
    let (beta, support) = make_coefficients(cfg.p, cfg.s, cfg.beta_range, &mut coef_rng)?;

    let cens = Uniform::new(0.0, cfg.cens_hi).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut eta = Vec::with_capacity(cfg.n);
    let mut time = Vec::with_capacity(cfg.n);
    let mut event = Vec::with_capacity(cfg.n);
    for row in x.rows() {
        let e = true_log_hazard(row, &beta, &support, cfg.scale);
        // open interval (0, 1): reject the measure-zero endpoint 0
        let u = loop {
            let u: f64 = time_rng.random();
            if u > 0.0 {
                break u;
            }
        };
        let t = sample_event_time(e, cfg.gamma, u)?;
        let c = cens.sample(&mut time_rng);
        let (y, d) = apply_censoring(t, c, cfg.tau);
        eta.push(e);
        time.push(y);
        event.push(d);
    }
    let data = SurvivalData::new(x, time, event)?;
    let censoring_fraction = data.censoring_fraction();
    Ok(GeneratedDataset {
        config: cfg.clone(),
        data,
        truth: GroundTruth::new(beta, support, cfg.scale, eta),
        censoring_fraction,
    })
}

/// Seeded split into `(train, test)` index sets; `train_frac` of the rows
/// (rounded) go to training.
pub fn split_indices(n: usize, train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1], got {train_frac}"
        )));
    }
    let mut rng = seeded(derive_seed(seed, "split"));
    let perm = sample(&mut rng, n, n).into_vec();
    let n_train = ((n as f64) * train_frac).round() as usize;
    let n_train = n_train.clamp(1, n);
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
