use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use super::persist::{append_row, read_rows, write_manifest, write_rows, Manifest};
use super::{SweepConfig, SweepRow};
use crate::datagen::{generate_dataset, split_indices, GeneratedDataset, Grid, GroundTruth};
use crate::net::{mlp_init, param_count, train, z_norm_diagnostic, LabeledSet, MlpParams, TrainConfig};
use crate::rng::derive_seed;
use crate::survloss::{default_grid, infimum, LossKind, Targets};
use crate::theory::budget_check_network;
use crate::{Error, Result};

/// Coordinates of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub width: usize,
    pub lr: f64,
    pub batch: usize,
    pub replicate: usize,
}

impl Cell {
    fn key(&self) -> (usize, u64, usize, usize) {
        (self.width, self.lr.to_bits(), self.batch, self.replicate)
    }

    fn label(&self, model: LossKind) -> String {
        format!(
            "{model}/w{}/lr{:e}/b{}/r{}",
            self.width, self.lr, self.batch, self.replicate
        )
    }
}

/// The fixed pooled sample of a sweep, split and discretised.
#[derive(Debug, Clone)]
pub struct SweepData {
    pub generated: GeneratedDataset,
    pub grid: Option<Grid>,
    pub train: LabeledSet,
    pub test: LabeledSet,
    pub test_truth: GroundTruth,
    /// Per-sample infimum of the training loss.
    pub train_infimum: f64,
}

impl SweepData {
    pub fn build(cfg: &SweepConfig) -> Result<Self> {
        let generated = generate_dataset(&cfg.data)?;
        let data = &generated.data;
        let (tr, te) = split_indices(data.len(), cfg.train_frac, cfg.data.seed)?;
        let grid = if cfg.model.is_interval() {
            Some(default_grid(cfg.model, &data.time, cfg.intervals)?)
        } else {
            None
        };
        let labeled = |idx: &[usize]| -> Result<LabeledSet> {
            let part = data.subset(idx);
            let targets = Targets::build(cfg.model, &part, grid.as_ref())?;
            LabeledSet::new(part.x, targets)
        };
        let train = labeled(&tr)?;
        let test = labeled(&te)?;
        let train_infimum = infimum(cfg.model, &train.targets)? / train.n() as f64;
        Ok(Self {
            test_truth: generated.truth.subset(&te),
            generated,
            grid,
            train,
            test,
            train_infimum,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.grid.as_ref().map_or(1, Grid::m)
    }
}

/// Every cell of the grid in canonical order.
pub fn grid_cells(cfg: &SweepConfig, n_train: usize) -> Vec<Cell> {
    let batches = cfg.effective_batches(n_train);
    let mut out = Vec::new();
    for &width in &cfg.widths {
        for &lr in &cfg.learning_rates {
            for &batch in &batches {
                for replicate in 0..cfg.replicates {
                    out.push(Cell {
                        width,
                        lr,
                        batch,
                        replicate,
                    });
                }
            }
        }
    }
    out
}

/// Train one cell and collect its diagnostics.
pub fn train_cell(cfg: &SweepConfig, data: &SweepData, cell: Cell) -> Result<(SweepRow, MlpParams)> {
    let seed = derive_seed(cfg.base_seed, &cell.label(cfg.model));
    let p = data.train.x.ncols();
    let q = data.output_dim();
    let params = mlp_init(p, cell.width, q, derive_seed(seed, "init"))?;
    let tc = TrainConfig {
        lr: cell.lr,
        batch_size: cell.batch,
        seed: derive_seed(seed, "shuffle"),
        ..cfg.train.clone()
    };
    let out = train(params, &data.train, Some(&data.test), cfg.model, &tc)?;
    let mut row = SweepRow {
        model: cfg.model,
        width: cell.width,
        d: param_count(p, cell.width, q),
        lr: cell.lr,
        batch: cell.batch,
        replicate: cell.replicate,
        train_loss: out.final_train_loss,
        test_loss: out.final_test_loss.unwrap_or(f64::NAN),
        w_norm: out.w_norm,
        margin: out.margin,
        z_norm_deviation: None,
        converged_epoch: out.converged_epoch,
        diverged: out.diverged,
        seed,
        epochs_run: out.epochs_run,
        init_train_loss: out.initial_train_loss,
        train_infimum: data.train_infimum,
        train_loss_raw: out.final_train_loss_raw,
        max_embedding_norm: out.max_embedding_norm,
        budget_lhs: None,
        budget_rhs: None,
        risk_mode: tc.risk_mode,
    };
    if out.diverged {
        return Ok((row, out.params));
    }
    if cfg.model == LossKind::DeepSurv {
        let z = z_norm_diagnostic(&out.params, data.test.x.view(), &data.test_truth)?;
        row.z_norm_deviation = Some(z.deviation);
    }
    if out.margin.is_some_and(|m| m > 0.0) {
        match budget_check_network(&out.params, data.train.x.view(), &data.train.targets, cfg.model) {
            Ok(b) => {
                row.budget_lhs = Some(b.lhs);
                row.budget_rhs = Some(b.rhs);
            }
            Err(Error::NoMargin(_)) | Err(Error::UndefinedMargin) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((row, out.params))
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        (a.width, a.lr, a.batch, a.replicate)
            .partial_cmp(&(b.width, b.lr, b.batch, b.replicate))
            .expect("finite grid coordinates")
    });
}

/// Train every cell of the sweep on `cfg.jobs` worker threads.
///
/// With `out_dir`, finished rows are appended to `rows.csv` as they arrive;
/// cells already present there are skipped, and the file is rewritten in
/// canonical order once the sweep completes. `on_row` sees each new row.
pub fn run_sweep(
    cfg: &SweepConfig,
    out_dir: Option<&Path>,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let data = SweepData::build(cfg)?;
    let all = grid_cells(cfg, data.train.n());

    let mut done: Vec<SweepRow> = Vec::new();
    let mut log = None;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let manifest = Manifest::new(cfg)?;
        if manifest_path.exists() {
            let prior = super::read_manifest(&manifest_path)?;
            if prior.config_hash != manifest.config_hash {
                return Err(Error::InvalidConfig(format!(
                    "{} holds a sweep with a different configuration",
                    dir.display()
                )));
            }
        }
        write_manifest(&manifest, &manifest_path)?;
        let rows_path = dir.join("rows.csv");
        if rows_path.exists() {
            done = read_rows(&rows_path)?;
        }
        let fresh = !rows_path.exists() || fs::metadata(&rows_path).map_err(|e| Error::io(&rows_path, e))?.len() == 0;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&rows_path)
            .map_err(|e| Error::io(&rows_path, e))?;
        if fresh {
            writeln!(file, "{}", super::ROW_HEADER.join(",")).map_err(|e| Error::io(&rows_path, e))?;
        }
        log = Some((rows_path, file));
    }

    let seen: HashSet<_> = done.iter().map(|r| r.cell().key()).collect();
    let todo: Vec<Cell> = all.into_iter().filter(|c| !seen.contains(&c.key())).collect();

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Result<SweepRow>>();
    let failure = thread::scope(|scope| -> Result<()> {
        for _ in 0..cfg.jobs.min(todo.len()) {
            let tx = tx.clone();
            let (todo, next, data) = (&todo, &next, &data);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&cell) = todo.get(k) else { break };
                let res = train_cell(cfg, data, cell).map(|(row, _)| row);
                let stop = res.is_err();
                if tx.send(res).is_err() || stop {
                    break;
                }
            });
        }
        drop(tx);
        for res in rx {
            let row = match res {
                Ok(row) => row,
                Err(e) => {
                    next.store(usize::MAX / 2, Ordering::Relaxed);
                    return Err(e);
                }
            };
            if let Some((path, file)) = log.as_mut() {
                append_row(file, &row)?;
                file.flush().map_err(|e| Error::io(path.as_path(), e))?;
            }
            log::info!(
                "{} width={} lr={:e} batch={} rep={} train={:.5} test={:.5} epochs={}{}",
                row.model,
                row.width,
                row.lr,
                row.batch,
                row.replicate,
                row.train_loss,
                row.test_loss,
                row.epochs_run,
                if row.diverged { " diverged" } else { "" }
            );
            on_row(&row);
            done.push(row);
        }
        Ok(())
    });
    failure?;

    sort_rows(&mut done);
    if let Some((path, file)) = log {
        drop(file);
        write_rows(&done, &path)?;
    }
    Ok(done)
}
