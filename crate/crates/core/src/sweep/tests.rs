use std::fs;

use proptest::prelude::*;

use super::*;
use crate::datagen::GenConfig;
use crate::net::{RiskMode, TrainConfig};
use crate::survloss::LossKind;

fn tiny(model: LossKind) -> SweepConfig {
    SweepConfig {
        model,
        widths: vec![2, 4],
        batch_sizes: vec![16],
        learning_rates: vec![5e-3],
        replicates: 2,
        base_seed: 3,
        data: GenConfig {
            n: 40,
            p: 4,
            s: 2,
            ..GenConfig::desk()
        },
        train_frac: 0.7,
        intervals: 4,
        jobs: 2,
        train: TrainConfig {
            max_epochs: 15,
            window: 5,
            ..TrainConfig::default()
        },
    }
}

fn row(width: usize, lr: f64, batch: usize, replicate: usize, train: f64) -> SweepRow {
    SweepRow {
        model: LossKind::Nnet,
        width,
        d: width * 10,
        lr,
        batch,
        replicate,
        train_loss: train,
        test_loss: 2.0 * train,
        w_norm: 1.0 + train,
        margin: Some(train - 1.0),
        z_norm_deviation: None,
        converged_epoch: Some(10),
        diverged: false,
        seed: 1,
        epochs_run: 10,
        init_train_loss: 5.0,
        train_infimum: 0.0,
        train_loss_raw: train * 28.0,
        max_embedding_norm: 3.0,
        budget_lhs: None,
        budget_rhs: None,
        risk_mode: RiskMode::BatchLocal,
    }
}

#[test]
fn presets_validate() {
    for kind in LossKind::ALL {
        SweepConfig::desk(kind).validate().unwrap();
        SweepConfig::full(kind).validate().unwrap();
    }
    let cfg = SweepConfig::desk(LossKind::Nnet);
    assert_eq!(cfg.widths, vec![2, 4, 8, 16, 32, 64, 128, 256]);
    assert_eq!((cfg.data.n, cfg.data.p, cfg.data.s, cfg.replicates), (400, 30, 10, 5));
    let full = SweepConfig::full(LossKind::DeepSurv);
    assert_eq!(
        (
            full.data.p,
            full.replicates,
            full.learning_rates.len() * full.batch_sizes.len()
        ),
        (60, 30, 24)
    );
    assert!(SweepConfig {
        replicates: 0,
        ..tiny(LossKind::Nnet)
    }
    .validate()
    .is_err());
    assert!(SweepConfig {
        widths: vec![],
        ..tiny(LossKind::Nnet)
    }
    .validate()
    .is_err());
}

#[test]
fn full_batch_deepsurv_collapses_batch_grid() {
    let mut cfg = tiny(LossKind::DeepSurv);
    cfg.batch_sizes = vec![8, 16];
    assert_eq!(cfg.effective_batches(28), vec![8, 16]);
    cfg.train.risk_mode = RiskMode::FullBatch;
    assert_eq!(cfg.effective_batches(28), vec![28]);
}

#[test]
fn sweep_cardinality_and_row_contents() {
    for kind in LossKind::ALL {
        let cfg = tiny(kind);
        let rows = run_sweep(&cfg, None, |_| {}).unwrap();
        assert_eq!(rows.len(), 4, "{kind}");
        let q = SweepData::build(&cfg).unwrap().output_dim();
        for r in &rows {
            assert_eq!(r.d, crate::net::param_count(4, r.width, q));
            assert!(r.diverged || (r.train_loss.is_finite() && r.test_loss.is_finite()));
            assert_eq!(r.z_norm_deviation.is_some(), kind == LossKind::DeepSurv && !r.diverged);
            if let (Some(l), Some(rhs)) = (r.budget_lhs, r.budget_rhs) {
                assert!(l >= rhs - 1e-9);
            }
        }
    }
}

#[test]
fn rows_do_not_depend_on_job_count() {
    let cfg = tiny(LossKind::PcHazard);
    let a = run_sweep(&SweepConfig { jobs: 1, ..cfg.clone() }, None, |_| {}).unwrap();
    let b = run_sweep(&SweepConfig { jobs: 3, ..cfg }, None, |_| {}).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resume_after_interrupt_is_idempotent() {
    let cfg = tiny(LossKind::Nmtlr);
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&cfg, Some(dir.path()), |_| {}).unwrap();
    let rows_path = dir.path().join("rows.csv");
    let complete = fs::read(&rows_path).unwrap();

    // keep the header and one logged row, as if the run had been killed
    let text = String::from_utf8(complete.clone()).unwrap();
    let partial: Vec<&str> = text.lines().take(2).collect();
    fs::write(&rows_path, partial.join("\n") + "\n").unwrap();
    let mut fresh = 0;
    run_sweep(&cfg, Some(dir.path()), |_| fresh += 1).unwrap();
    assert_eq!(fresh, 3);
    assert_eq!(fs::read(&rows_path).unwrap(), complete);

    let mut other = cfg.clone();
    other.base_seed += 1;
    assert!(matches!(
        run_sweep(&other, Some(dir.path()), |_| {}),
        Err(crate::Error::InvalidConfig(_))
    ));
}

#[test]
fn manifest_hash_tracks_config() {
    let a = tiny(LossKind::Nnet);
    let mut b = a.clone();
    assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    b.learning_rates = vec![1e-3];
    assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    write_manifest(&Manifest::new(&a).unwrap(), &path).unwrap();
    assert_eq!(read_manifest(&path).unwrap().config, a);
}

#[test]
fn row_header_is_stable() {
    let golden = include_str!("../../tests/golden/rows_header.csv");
    assert_eq!(golden.trim_end(), ROW_HEADER.join(","));
    let mut w = csv::Writer::from_writer(vec![]);
    w.serialize(row(2, 1e-3, 32, 0, 1.0)).unwrap();
    let out = String::from_utf8(w.into_inner().unwrap()).unwrap();
    assert_eq!(out.lines().next().unwrap(), golden.trim_end());
}

#[test]
fn rows_and_curves_round_trip() {
    let mut rows = vec![
        row(2, 1e-3, 32, 0, 0.1 + 1e-17),
        row(4, 2e-3, 64, 1, std::f64::consts::PI),
    ];
    rows[1].diverged = true;
    rows[1].train_loss = f64::NAN;
    rows[1].margin = None;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    write_rows(&rows, &path).unwrap();
    let back = read_rows(&path).unwrap();
    assert_eq!(back[0], rows[0]);
    assert!(back[1].train_loss.is_nan() && back[1].margin.is_none());
    assert_eq!(back[1].test_loss, rows[1].test_loss);

    let curve = aggregate(&back).unwrap().points;
    let cpath = dir.path().join("curves.csv");
    write_curves(&curve, &cpath).unwrap();
    let again = read_curves(&cpath).unwrap();
    assert_eq!(again.len(), curve.len());
    assert_eq!(format!("{:?}", again[0]), format!("{:?}", curve[0]));
    assert!(again[1].gap && again[1].train_loss.is_nan());
}

#[test]
fn aggregate_examples() {
    let single = aggregate(&[row(8, 1e-3, 32, 0, 0.7)]).unwrap();
    let p = &single.points[0];
    assert_eq!(
        (p.train_loss, p.test_loss, p.w_norm, p.cells, p.rows),
        (0.7, 1.4, 1.7, 1, 1)
    );

    let mut rows: Vec<SweepRow> = [1.0, 2.0, 3.0]
        .iter()
        .enumerate()
        .map(|(k, &v)| row(8, 1e-3, 32, k, v))
        .collect();
    rows.push(row(8, 2e-3, 32, 0, 10.0));
    let agg = aggregate(&rows).unwrap();
    assert_eq!(agg.points[0].train_loss, 6.0);
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert!(median(&[]).is_nan());
}

#[test]
fn diverged_rows_are_excluded_and_counted() {
    let mut rows = vec![
        row(2, 1e-3, 32, 0, 1.0),
        row(2, 1e-3, 32, 1, 100.0),
        row(4, 1e-3, 32, 0, 0.5),
    ];
    rows[1].diverged = true;
    rows[2].diverged = true;
    let agg = aggregate(&rows).unwrap();
    assert_eq!(agg.diverged, 2);
    assert_eq!(agg.points[0].train_loss, 1.0);
    assert!(agg.points[1].gap && agg.points[1].train_loss.is_nan());
    assert_eq!(detect_threshold(&agg.points, 0.0, 0.6), None);
}

#[test]
fn aggregate_rejects_mixed_models() {
    let mut other = row(2, 1e-3, 32, 1, 1.0);
    other.model = LossKind::Nmtlr;
    assert!(aggregate(&[row(2, 1e-3, 32, 0, 1.0), other]).is_err());
    assert!(aggregate(&[]).is_err());
}

fn curve(values: &[(usize, f64)]) -> Vec<CurvePoint> {
    let rows: Vec<SweepRow> = values.iter().map(|&(w, v)| row(w, 1e-3, 32, 0, v)).collect();
    aggregate(&rows).unwrap().points
}

#[test]
fn threshold_examples() {
    let c = curve(&[(2, 0.01), (4, 0.005)]);
    assert_eq!(detect_threshold(&c, 0.0, 0.05), Some(2));
    let c = curve(&[(16, 3.0), (32, 1.0), (64, 0.1), (128, 0.01)]);
    assert_eq!(detect_threshold(&c, 0.0, 0.25), Some(64));
    assert_eq!(detect_threshold(&c, 0.0, 1e-3), None);
    assert_eq!(detect_threshold(&c, -0.5, 0.55), Some(128));
    assert!((threshold_tolerance(&c) - 0.25).abs() < 1e-15);
}

#[test]
fn render_two_points_and_marker() {
    let c = curve(&[(2, 1.0), (8, 0.5)]);
    let svg = render_curves(&c, None, "toy").unwrap();
    let train_line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let pts = train_line.split('"').nth(1).unwrap();
    assert_eq!(pts.split(' ').count(), 2);
    assert!(!svg.contains("class=\"threshold\""));
    let marked = render_curves(&c, Some(8), "toy").unwrap();
    assert!(marked.contains("class=\"threshold\""));
    assert!(matches!(
        render_curves(&c[..1], None, "toy"),
        Err(crate::Error::EmptyChart(_))
    ));
}

#[test]
fn render_matches_golden() {
    let mut c = curve(&[(2, 2.5), (4, 1.25), (8, 0.5), (16, 0.125)]);
    for (k, p) in c.iter_mut().enumerate() {
        p.z_norm_deviation = 0.25 * k as f64 - 0.1;
    }
    let svg = render_curves(&c, Some(8), "toy curve").unwrap();
    let golden = include_str!("../../tests/golden/toy_curve.svg");
    assert_eq!(svg, golden);
}

/// Straightforward re-implementation of the aggregation rule.
fn oracle(rows: &[SweepRow], width: usize) -> f64 {
    let mut cells: Vec<(u64, usize)> = rows
        .iter()
        .filter(|r| r.width == width && !r.diverged)
        .map(|r| (r.lr.to_bits(), r.batch))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let mut means: Vec<f64> = cells
        .iter()
        .map(|&(lr, b)| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.width == width && !r.diverged && r.lr.to_bits() == lr && r.batch == b)
                .map(|r| r.train_loss)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = means.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        means[n / 2]
    } else {
        (means[n / 2 - 1] + means[n / 2]) / 2.0
    }
}

proptest! {
    #[test]
    fn aggregate_matches_oracle(cells in prop::collection::vec((0usize..3, 0usize..3, 0usize..2, 0.0f64..10.0, prop::bool::weighted(0.15)), 1..60)) {
        let lrs = [1e-3, 2e-3, 5e-4];
        let mut rows: Vec<SweepRow> = Vec::new();
        for (k, &(w, l, b, v, div)) in cells.iter().enumerate() {
            let mut r = row(1 << (w + 1), lrs[l], [32, 64][b], k, v);
            r.diverged = div;
            rows.push(r);
        }
        let agg = aggregate(&rows).unwrap();
        for p in &agg.points {
            let o = oracle(&rows, p.width);
            if o.is_nan() {
                prop_assert!(p.gap && p.train_loss.is_nan());
            } else {
                prop_assert!((p.train_loss - o).abs() <= 1e-12 * o.abs().max(1.0), "{} vs {}", p.train_loss, o);
            }
        }
        prop_assert_eq!(agg.diverged, rows.iter().filter(|r| r.diverged).count());
        // re-aggregation of the same rows is exact
        prop_assert_eq!(format!("{:?}", aggregate(&rows).unwrap().points), format!("{:?}", agg.points));
    }
}
