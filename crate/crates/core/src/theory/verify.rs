use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    budget_check_network, deepsurv_scaling_path, epsilon_margin_deepsurv, nmtlr_construct, nnet_construct,
    pchazard_construct, pchazard_free_fit, ARITH_SLACK, BOUND_SLACK, DEFAULT_EPS_GRID, DEFAULT_T_GRID,
};
use crate::datagen::DiscretizedDataset;
use crate::net::{mlp_init, train, LabeledSet, RiskMode, TrainConfig};
use crate::rng::{derive_seed, seeded};
use crate::survloss::gradcheck::Instance;
use crate::survloss::{deepsurv_loss, LossKind, RiskSetIndex, Targets};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `lhs <= rhs + 1e-12`
    #[serde(rename = "<=")]
    AtMost,
    /// `lhs >= rhs - 1e-9`
    #[serde(rename = ">=")]
    AtLeast,
    /// `lhs < rhs`
    #[serde(rename = "<")]
    Below,
}

impl Relation {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::AtMost => lhs <= rhs + ARITH_SLACK,
            Relation::AtLeast => lhs >= rhs - BOUND_SLACK,
            Relation::Below => lhs < rhs,
        }
    }
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub params: Value,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl CheckRecord {
    fn new(name: &str, params: Value, relation: Relation, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            params,
            relation,
            lhs,
            rhs,
            pass: relation.holds(lhs, rhs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Scaling,
    Epsilon,
    Constructions,
    Infimum,
    Budget,
}

impl Suite {
    const PARTS: [Suite; 5] = [
        Suite::Scaling,
        Suite::Epsilon,
        Suite::Constructions,
        Suite::Infimum,
        Suite::Budget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Scaling => "scaling",
            Suite::Epsilon => "epsilon",
            Suite::Constructions => "constructions",
            Suite::Infimum => "infimum",
            Suite::Budget => "budget",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Suite::All)
            .chain(Suite::PARTS)
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

/// Run one suite (or all of them) on instances derived from `seed`.
pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckRecord>> {
    match suite {
        Suite::All => {
            let mut out = Vec::new();
            for part in Suite::PARTS {
                out.extend(run_suite(part, seed)?);
            }
            Ok(out)
        }
        Suite::Scaling => scaling(seed),
        Suite::Epsilon => epsilon(seed),
        Suite::Constructions => constructions(seed),
        Suite::Infimum => infimum(seed),
        Suite::Budget => budget(seed),
    }
}

/// Distinct times with a score that ranks earlier times higher, which is
/// separable on every risk set.
fn separable_instance(n: usize, seed: u64) -> (Vec<f64>, RiskSetIndex) {
    use rand::seq::SliceRandom;
    use rand::Rng as _;
    let mut rng = seeded(seed);
    let mut time: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
    time.shuffle(&mut rng);
    let event: Vec<bool> = (0..n).map(|k| k == 0 || rng.random_bool(0.6)).collect();
    let z = time.iter().map(|t| -3.0 * t).collect();
    (z, RiskSetIndex::new(&time, &event))
}

fn scaling(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for rep in 0..5 {
        let n = 4 + 2 * rep as usize;
        let (z, risk) = separable_instance(n, derive_seed(seed, &format!("scaling/{rep}")));
        let path = deepsurv_scaling_path(&z, &risk, &DEFAULT_T_GRID)?;
        for p in &path {
            out.push(CheckRecord::new(
                "deepsurv_scaling.loss_le_bound",
                json!({"n": n, "rep": rep, "t": p.t}),
                Relation::AtMost,
                p.loss,
                p.bound,
            ));
        }
        for w in path.windows(2) {
            out.push(CheckRecord::new(
                "deepsurv_scaling.strictly_decreasing",
                json!({"n": n, "rep": rep, "t": w[1].t}),
                Relation::Below,
                w[1].loss,
                w[0].loss,
            ));
        }
    }
    Ok(out)
}

fn epsilon(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let pair = RiskSetIndex::new(&[1.0, 2.0], &[true, false]);
    for gap in [1.0, 3.0, 8.0, 20.0] {
        let z = Array2::from_shape_vec((2, 1), vec![gap, 0.0]).expect("2x1");
        let eps = deepsurv_loss(z.view(), &pair)?.total;
        let em = epsilon_margin_deepsurv(z.view(), &Targets::Risk(pair.clone()), eps)?;
        out.push(CheckRecord::new(
            "epsilon_margin.two_point",
            json!({"gap": gap, "epsilon": eps}),
            Relation::AtLeast,
            em.margin.gamma,
            em.required,
        ));
    }
    let (z, risk) = separable_instance(10, derive_seed(seed, "epsilon"));
    let targets = Targets::Risk(risk.clone());
    for eps in DEFAULT_EPS_GRID {
        let mut t = 1.0;
        let scaled = loop {
            let s = Array2::from_shape_fn((z.len(), 1), |(i, _)| t * z[i]);
            if deepsurv_loss(s.view(), &risk)?.total <= eps {
                break s;
            }
            t *= 1.5;
        };
        let em = epsilon_margin_deepsurv(scaled.view(), &targets, eps)?;
        out.push(CheckRecord::new(
            "epsilon_margin.scaled_separable",
            json!({"epsilon": eps, "t": t, "excess": em.excess}),
            Relation::AtLeast,
            em.margin.gamma,
            em.required,
        ));
    }
    Ok(out)
}

fn interval_instance(kind: LossKind, n: usize, m: usize, seed: u64) -> Result<DiscretizedDataset> {
    match Instance::random(kind, n, m, seed)?.targets {
        Targets::Intervals(d) => Ok(d),
        Targets::Risk(_) => unreachable!("interval kind"),
    }
}

fn constructions(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for rep in 0..4u64 {
        let n = 5 + 2 * rep as usize;
        let m = 3 + (rep as usize % 3);
        let s = derive_seed(seed, &format!("constructions/{rep}"));
        let disc = interval_instance(LossKind::PcHazard, n, m, s)?;
        for eps in [1e-1, 1e-2, 1e-3, 1e-5] {
            let c = pchazard_construct(&disc, eps)?;
            out.push(CheckRecord::new(
                "pchazard_construct.excess_le_bound",
                json!({"n": n, "m": m, "rep": rep, "eps_prime": eps}),
                Relation::AtMost,
                c.excess,
                c.bound,
            ));
        }
        let disc = interval_instance(LossKind::Nnet, n, m, s)?;
        for t in [2.0, 5.0, 10.0, 20.0] {
            let c = nnet_construct(&disc, t)?;
            out.push(CheckRecord::new(
                "nnet_construct.loss_le_bound",
                json!({"n": n, "m": m, "rep": rep, "t": t}),
                Relation::AtMost,
                c.loss,
                c.bound,
            ));
        }
        let disc = interval_instance(LossKind::Nmtlr, n, m, s)?;
        for t in [2.0, 5.0, 10.0, 20.0] {
            let c = nmtlr_construct(&disc, t)?;
            let worst = c
                .terms
                .iter()
                .zip(&c.bounds)
                .map(|(l, b)| l - b)
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(CheckRecord::new(
                "nmtlr_construct.terms_le_bounds",
                json!({"n": n, "m": disc.m(), "rep": rep, "t": t}),
                Relation::AtMost,
                worst,
                0.0,
            ));
        }
    }
    Ok(out)
}

fn infimum(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for rep in 0..3u64 {
        let (n, m) = (10 + 5 * rep as usize, 3 + rep as usize);
        let disc = interval_instance(LossKind::PcHazard, n, m, derive_seed(seed, &format!("infimum/{rep}")))?;
        let c = pchazard_construct(&disc, 1e-5)?;
        out.push(CheckRecord::new(
            "pchazard_infimum.construct_gap",
            json!({"n": n, "m": m, "rep": rep, "eps_prime": 1e-5}),
            Relation::AtMost,
            c.excess,
            1e-3,
        ));
        let fit = pchazard_free_fit(&disc, 4000)?;
        out.push(CheckRecord::new(
            "pchazard_infimum.free_fit_gap",
            json!({"n": n, "m": m, "rep": rep, "iterations": fit.iterations}),
            Relation::AtMost,
            fit.gap.abs(),
            1e-3,
        ));
    }
    Ok(out)
}

fn budget(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for kind in LossKind::ALL {
        let inst = Instance::random(kind, 12, 4, derive_seed(seed, &format!("budget/{kind}")))?;
        let mut rng = seeded(derive_seed(seed, &format!("budget/{kind}/x")));
        let x = Array2::from_shape_fn((12, 3), |_| StandardNormal.sample(&mut rng));
        let set = LabeledSet::new(x, inst.targets)?;
        let cfg = TrainConfig {
            lr: 0.01,
            batch_size: 12,
            max_epochs: 600,
            risk_mode: RiskMode::FullBatch,
            seed,
            ..TrainConfig::default()
        };
        let net = mlp_init(3, 16, inst.logits.ncols(), seed)?;
        let fit = train(net, &set, None, kind, &cfg)?;
        match budget_check_network(&fit.params, set.x.view(), &set.targets, kind) {
            Ok(b) => out.push(CheckRecord::new(
                "margin_budget.trained",
                json!({"kind": kind, "width": 16, "train_loss": fit.final_train_loss}),
                Relation::AtLeast,
                b.lhs,
                b.rhs,
            )),
            Err(Error::NoMargin(_)) | Err(Error::UndefinedMargin) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
