use ndarray::{array, Array2};
use proptest::prelude::*;

use super::*;
use crate::datagen::{DiscretizedDataset, Grid};
use crate::net::Layer;
use crate::survloss::gradcheck::Instance;
use crate::survloss::{LossKind, RiskSetIndex, Targets};
use crate::Error;

fn disc(cuts: Vec<f64>, time: &[f64], event: &[bool]) -> DiscretizedDataset {
    DiscretizedDataset::assign(&Grid::from_cuts(cuts).unwrap(), time, event).unwrap()
}

fn intervals(kind: LossKind, n: usize, m: usize, seed: u64) -> DiscretizedDataset {
    match Instance::random(kind, n, m, seed).unwrap().targets {
        Targets::Intervals(d) => d,
        Targets::Risk(_) => unreachable!(),
    }
}

#[test]
fn scaling_path_two_subjects() {
    let risk = RiskSetIndex::new(&[1.0, 2.0], &[true, false]);
    let path = deepsurv_scaling_path(&[1.0, 0.0], &risk, &[0.0, 10.0]).unwrap();
    assert!((path[0].loss - 2f64.ln()).abs() < 1e-15);
    let expected = (-10f64).exp().ln_1p();
    assert!((path[1].loss - expected).abs() < 1e-18);
    assert!((path[1].loss - 4.54e-5).abs() < 1e-7);
    assert!(path[1].loss <= path[1].bound + ARITH_SLACK);
}

#[test]
fn scaling_path_at_zero_is_log_risk_sizes() {
    let time = [0.5, 0.1, 0.9, 0.3, 0.7];
    let event = [true, true, false, true, false];
    let risk = RiskSetIndex::new(&time, &event);
    let z: Vec<f64> = time.iter().map(|t| -t).collect();
    let path = deepsurv_scaling_path(&z, &risk, &DEFAULT_T_GRID).unwrap();
    // risk sets: 0.5 -> 3, 0.1 -> 5, 0.3 -> 4
    let expect = 3f64.ln() + 5f64.ln() + 4f64.ln();
    assert!((path[0].loss - expect).abs() < 1e-12);
    assert!((path[0].bound - expect).abs() < 1e-12);
    for w in path.windows(2) {
        assert!(w[1].loss < w[0].loss);
    }
}

#[test]
fn scaling_path_rejects_non_separable() {
    let risk = RiskSetIndex::new(&[1.0, 2.0, 3.0], &[true, true, false]);
    let err = deepsurv_scaling_path(&[1.0, 0.0, 0.5], &risk, &[1.0]).unwrap_err();
    assert!(matches!(err, Error::Separability { event: 1, other: 2 }), "{err:?}");
}

#[test]
fn epsilon_margin_two_point() {
    let risk = RiskSetIndex::new(&[1.0, 2.0], &[true, false]);
    let targets = Targets::Risk(risk);
    for g in [0.5f64, 2.0, 7.0] {
        let z = array![[g], [0.0]];
        let eps = (-g).exp().ln_1p();
        let em = epsilon_margin_deepsurv(z.view(), &targets, eps).unwrap();
        assert_eq!(em.margin.gamma, g);
        assert!(em.required <= g);
        assert!(em.check.pass);
    }
    let z = array![[0.1], [0.0]];
    let em = epsilon_margin_deepsurv(z.view(), &targets, std::f64::consts::LN_2).unwrap();
    assert!(em.required <= 0.0);
    assert!(em.check.pass);
    assert!(matches!(
        epsilon_margin_deepsurv(z.view(), &targets, 0.7),
        Err(Error::OutOfRegime(_))
    ));
    let required = (1e6f64).ln() - 2f64.ln();
    assert!((required - 13.1223).abs() < 1e-4);
}

#[test]
fn budget_rhs_arithmetic() {
    // DeepSurv: gamma = 1, widest comparable pair at distance 2
    let risk = Targets::Risk(RiskSetIndex::new(&[1.0, 2.0], &[true, false]));
    let readout = Layer {
        weight: array![[0.5], [0.0]],
        bias: array![0.0],
    };
    let f = array![[2.0, 0.0], [0.0, 0.0]];
    let b = margin_budget_check(&readout, f.view(), &risk, LossKind::DeepSurv).unwrap();
    assert!((b.rhs - 0.5).abs() < 1e-15);
    assert!((b.lhs - 0.5).abs() < 1e-12);
    assert!(b.pass);

    // interval kind: gamma = sqrt 2 with max ||(f, 1)|| = 1
    let d = disc(vec![0.0, 1.0, 2.0], &[0.5], &[true]);
    let readout = Layer {
        weight: Array2::zeros((1, 2)),
        bias: array![2f64.sqrt(), 0.0],
    };
    let f = array![[0.0]];
    let b = margin_budget_check(&readout, f.view(), &Targets::Intervals(d), LossKind::Nnet).unwrap();
    assert!((b.rhs - 1.0).abs() < 1e-15);
    assert!(b.pass);
}

#[test]
fn budget_requires_margin() {
    let risk = Targets::Risk(RiskSetIndex::new(&[1.0, 2.0], &[true, false]));
    let readout = Layer {
        weight: array![[-1.0]],
        bias: array![0.0],
    };
    let f = array![[1.0], [0.0]];
    assert!(matches!(
        margin_budget_check(&readout, f.view(), &risk, LossKind::DeepSurv),
        Err(Error::NoMargin(_))
    ));
}

#[test]
fn pchazard_construct_examples() {
    // single censored subject in the first interval
    let d = disc(vec![0.0, 1.0, 2.0], &[0.4], &[false]);
    let c = pchazard_construct(&d, 1e-4).unwrap();
    assert!((c.excess - 0.4e-4).abs() < 1e-15);
    assert!(c.excess <= 0.4e-4 + 1e-15);

    // single event with rho = 1
    let d = disc(vec![0.0, 1.0], &[1.0], &[true]);
    let c = pchazard_construct(&d, 1e-8).unwrap();
    assert_eq!(c.infimum, 1.0);
    assert!((c.loss - 1.0).abs() < 1e-12);

    let d = intervals(LossKind::PcHazard, 5, 3, 4);
    let c = pchazard_construct(&d, 1e-3).unwrap();
    assert!(c.excess <= 15.0 * 1e-3 * 2.0);
    assert!(c.pass);
    assert!((c.excess - c.predicted_excess).abs() < 1e-12);
}

#[test]
fn pchazard_construct_excess_vanishes() {
    let d = intervals(LossKind::PcHazard, 8, 4, 7);
    let gaps: Vec<f64> = [1e-1, 1e-3, 1e-5, 1e-7]
        .iter()
        .map(|&e| pchazard_construct(&d, e).unwrap().excess)
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0]);
    }
    assert!(gaps[3] < 1e-5);
}

#[test]
fn pchazard_free_fit_reaches_infimum() {
    for seed in 0..3 {
        let d = intervals(LossKind::PcHazard, 20, 5, seed);
        let fit = pchazard_free_fit(&d, 4000).unwrap();
        assert!(fit.gap >= -1e-9, "{fit:?}");
        assert!(fit.gap <= 1e-3, "{fit:?}");
    }
}

#[test]
fn nnet_construct_examples() {
    let d = disc(vec![0.0, 1.0], &[0.5], &[true]);
    let c = nnet_construct(&d, 5.0).unwrap();
    assert_eq!(c.cells, 1);
    assert!((c.loss - 0.006_715_348_489_118).abs() < 1e-12);
    assert!((c.bound - 0.006_737_946_999_085).abs() < 1e-12);

    let d = intervals(LossKind::Nnet, 9, 4, 2);
    let losses: Vec<f64> = [2.0, 5.0, 10.0, 20.0]
        .iter()
        .map(|&t| nnet_construct(&d, t).unwrap().loss)
        .collect();
    for w in losses.windows(2) {
        assert!(w[1] < w[0]);
    }
    let c = nnet_construct(&d, 3.0).unwrap();
    assert_eq!(c.cells, d.n_cells());
    assert!((c.bound - d.n_cells() as f64 * (-3f64).exp()).abs() < 1e-15);
}

#[test]
fn nmtlr_construct_examples() {
    let d = disc(vec![0.0, 1.0, 2.0, 3.0], &[1.5], &[true]);
    let c = nmtlr_construct(&d, 5.0).unwrap();
    assert!((c.loss - (2.0 * (-10f64).exp()).ln_1p()).abs() < 1e-18);
    assert!((c.loss - 2.0 * (-10f64).exp()).abs() < 1e-8);
    assert!(c.pass);

    let d = disc(vec![0.0, 1.0, 2.0], &[0.5], &[false]);
    let c = nmtlr_construct(&d, 5.0).unwrap();
    let s = 5f64.exp() / (5f64.exp() + (-5f64).exp());
    assert!((c.loss + s.ln()).abs() < 1e-15);
    assert!((c.loss - (-10f64).exp()).abs() < 1e-8);

    let d = disc(vec![0.0, 1.0, 2.0, 3.0, 4.0], &[2.5], &[true]);
    let c = nmtlr_construct(&d, 0.0).unwrap();
    assert!((c.loss - 4f64.ln()).abs() < 1e-12);

    let d = disc(vec![0.0, 1.0, 2.0], &[1.5], &[false]);
    assert!(matches!(nmtlr_construct(&d, 1.0), Err(Error::TailDefinition(0))));
}

#[test]
fn margin_examples() {
    let risk = Targets::Risk(RiskSetIndex::new(&[1.0, 2.0], &[true, false]));
    let m = measure_margin(array![[1.0], [0.0]].view(), &risk, LossKind::DeepSurv).unwrap();
    assert_eq!((m.gamma, m.subject, m.rival), (1.0, 0, 1));

    let d = Targets::Intervals(disc(vec![0.0, 1.0, 2.0, 3.0], &[1.5], &[true]));
    let m = measure_margin(array![[-1.0, 3.0, 0.0]].view(), &d, LossKind::PcHazard).unwrap();
    assert_eq!((m.gamma, m.rival), (3.0, 2));

    let m = measure_margin(array![[0.5], [0.5]].view(), &risk, LossKind::DeepSurv).unwrap();
    assert_eq!(m.gamma, 0.0);

    let none = Targets::Risk(RiskSetIndex::new(&[1.0, 2.0], &[false, false]));
    assert!(matches!(
        measure_margin(array![[1.0], [0.0]].view(), &none, LossKind::DeepSurv),
        Err(Error::UndefinedMargin)
    ));
}

#[test]
fn nmtlr_margin_uses_cumulative_scores() {
    let d = Targets::Intervals(disc(vec![0.0, 1.0, 2.0, 3.0], &[0.5], &[true]));
    // C = (3, 1, 0.5)
    let m = measure_margin(array![[2.0, 0.5, 0.5]].view(), &d, LossKind::Nmtlr).unwrap();
    assert!((m.gamma - 2.0).abs() < 1e-15);
}

#[test]
fn nmtlr_budget_uses_cumulative_readout() {
    let d = Targets::Intervals(disc(vec![0.0, 1.0, 2.0, 3.0], &[0.5, 1.5], &[true, true]));
    // C rows: (2, -1, 0) and (1, 3, 0), both with margin 2
    let readout = Layer {
        weight: array![[3.0, -1.0, 0.0], [-2.0, 3.0, 0.0]],
        bias: array![0.0, 0.0, 0.0],
    };
    let f = array![[1.0, 0.0], [0.0, 1.0]];
    let b = margin_budget_check(&readout, f.view(), &d, LossKind::Nmtlr).unwrap();
    assert!(b.pass, "{b:?}");
}

#[test]
fn suites_all_pass() {
    let records = run_suite(Suite::All, 7).unwrap();
    assert!(records.len() > 50);
    assert!(records.iter().any(|r| r.name == "margin_budget.trained"));
    for r in &records {
        assert!(r.pass, "{r:?}");
    }
    assert_eq!("budget".parse::<Suite>().unwrap(), Suite::Budget);
    assert!("nope".parse::<Suite>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constructions_respect_bounds(seed in 0u64..10_000, n in 2usize..12, m in 2usize..6, t in 0.5f64..25.0) {
        let d = intervals(LossKind::Nnet, n, m, seed);
        prop_assert!(nnet_construct(&d, t).unwrap().pass);
        let d = intervals(LossKind::Nmtlr, n, m, seed);
        prop_assert!(nmtlr_construct(&d, t).unwrap().pass);
        let d = intervals(LossKind::PcHazard, n, m, seed);
        prop_assert!(pchazard_construct(&d, (-t).exp()).unwrap().pass);
    }

    #[test]
    fn random_readouts_obey_budget(seed in 0u64..10_000, kind_ix in 0usize..4) {
        use rand_distr::{Distribution, StandardNormal};
        let kind = LossKind::ALL[kind_ix];
        let inst = Instance::random(kind, 8, 4, seed).unwrap();
        let q = inst.logits.ncols();
        let mut rng = crate::rng::seeded(seed);
        let mut draw = |r, c| Array2::<f64>::from_shape_fn((r, c), |_| StandardNormal.sample(&mut rng));
        let readout = Layer { weight: draw(5, q), bias: draw(1, q).row(0).to_owned() };
        let f = draw(8, 5).mapv(f64::abs);
        match margin_budget_check(&readout, f.view(), &inst.targets, kind) {
            Ok(b) => prop_assert!(b.pass, "{:?}", b),
            Err(Error::NoMargin(_)) | Err(Error::UndefinedMargin) => {}
            Err(e) => panic!("{e}"),
        }
    }
}
