//! `survdd`: generate data, train networks, run capacity sweeps and check the
//! theory from the command line.

mod overrides;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use survdd::datagen::{generate_dataset, write_dataset, GenConfig};
use survdd::net::save_checkpoint;
use survdd::survloss::{default_grid, LossKind};
use survdd::sweep::{
    aggregate, curve_threshold, read_curves, read_rows, render_curves, run_sweep, train_cell, write_curves, Cell,
    SweepConfig, SweepData,
};
use survdd::theory::{run_suite, Suite};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] survdd::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

#[derive(Debug, Parser)]
#[command(
    name = "survdd",
    version,
    about = "Interpolation and double-descent laboratory for neural survival losses"
)]
struct Cli {
    /// Seed for the data generator (gen), the sweep base seed (train, sweep) or the check instances (verify).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Override a config entry, e.g. `--set train.max_epochs=500` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More progress output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a censored dataset: `<out>.csv` plus a `<out>.json` sidecar with the truth.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also store the interval grid for this model.
        #[arg(long, value_parser = parse_kind)]
        model: Option<LossKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one network of a sweep grid and save its checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        model: Option<LossKind>,
        #[arg(long)]
        width: usize,
        /// Defaults to the first learning rate of the config.
        #[arg(long)]
        lr: Option<f64>,
        /// Defaults to the first batch size of the config.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a capacity sweep; resumes from an existing `rows.csv` in `--out`.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        model: Option<LossKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate sweep rows into per-width curves.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render curves as an SVG line chart.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Run the numerical theory checks and print a JSON report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: survdd::Error| e.to_string())
}

enum Outcome {
    Done,
    ChecksFailed,
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match dispatch(cli) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::ChecksFailed) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.into(),
        source,
    })
}

fn echo<T: Serialize>(config: &T) -> Result<(), CliError> {
    eprintln!("resolved config:\n{}", serde_json::to_string_pretty(config)?);
    Ok(())
}

fn preset(p: Preset, model: LossKind) -> SweepConfig {
    match p {
        Preset::Desk => SweepConfig::desk(model),
        Preset::Full => SweepConfig::full(model),
    }
}

/// Config file if given, else the preset for `model`; then overrides and global flags.
fn sweep_config(cli: &Cli, config: &Option<PathBuf>, model: Option<LossKind>) -> Result<SweepConfig, CliError> {
    let base = match (config, model) {
        (Some(path), _) => read_json(path)?,
        (None, Some(m)) => preset(cli.preset, m),
        (None, None) => return Err(CliError::Usage("either --config or --model is required".into())),
    };
    let mut cfg = overrides::apply(base, &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn no_overrides(cli: &Cli, what: &str) -> Result<(), CliError> {
    if cli.set.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} takes no --set overrides")))
    }
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Gen { config, model, out } => {
            let base: GenConfig = match config {
                Some(path) => read_json(path)?,
                None => preset(cli.preset, model.unwrap_or(LossKind::Nnet)).data,
            };
            let mut cfg = overrides::apply(base, &cli.set)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            echo(&cfg)?;
            let generated = generate_dataset(&cfg)?;
            let grid = match model.filter(|m| m.is_interval()) {
                Some(m) => Some(default_grid(m, &generated.data.time, m.default_intervals())?),
                None => None,
            };
            write_dataset(&generated, grid, out)?;
            println!(
                "{} subjects, {} covariates, censoring fraction {:.4} -> {}",
                cfg.n,
                cfg.p,
                generated.censoring_fraction,
                out.with_extension("csv").display()
            );
        }
        Command::Train {
            config,
            model,
            width,
            lr,
            batch,
            replicate,
            out,
        } => {
            let cfg = sweep_config(&cli, config, *model)?;
            echo(&cfg)?;
            let data = SweepData::build(&cfg)?;
            let cell = Cell {
                width: *width,
                lr: lr.unwrap_or(cfg.learning_rates[0]),
                batch: batch.unwrap_or(cfg.effective_batches(data.train.n())[0]),
                replicate: *replicate,
            };
            let (row, params) = train_cell(&cfg, &data, cell)?;
            create_dir(out)?;
            write_json(&cfg, &out.join("config.json"))?;
            write_json(&row, &out.join("row.json"))?;
            save_checkpoint(&params, &out.join("checkpoint.json"))?;
            println!(
                "{} width {} (d = {}): train {:.6}, test {:.6}, ||W|| {:.4}, epochs {}{}",
                row.model,
                row.width,
                row.d,
                row.train_loss,
                row.test_loss,
                row.w_norm,
                row.epochs_run,
                if row.diverged { ", diverged" } else { "" }
            );
        }
        Command::Sweep { config, model, out } => {
            let cfg = sweep_config(&cli, config, *model)?;
            echo(&cfg)?;
            create_dir(out)?;
            write_json(&cfg, &out.join("config.json"))?;
            let rows = run_sweep(&cfg, Some(out), |_| {})?;
            let agg = aggregate(&rows)?;
            write_curves(&agg.points, &out.join("curves.csv"))?;
            let threshold = curve_threshold(&agg.points);
            if agg.points.iter().filter(|p| !p.gap).count() >= 2 {
                let svg = render_curves(&agg.points, threshold, &format!("{} capacity sweep", cfg.model))?;
                fs::write(out.join("curves.svg"), svg).map_err(|source| CliError::Io {
                    path: out.join("curves.svg"),
                    source,
                })?;
            }
            summarise(&agg, threshold);
        }
        Command::Aggregate { input, out } => {
            no_overrides(&cli, "aggregate")?;
            let rows = read_rows(input)?;
            let agg = aggregate(&rows)?;
            write_curves(&agg.points, out)?;
            summarise(&agg, curve_threshold(&agg.points));
        }
        Command::Plot { input, out, title } => {
            no_overrides(&cli, "plot")?;
            let curve = read_curves(input)?;
            let title = title.clone().unwrap_or_else(|| "capacity sweep".into());
            let svg = render_curves(&curve, curve_threshold(&curve), &title)?;
            fs::write(out, svg).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
        }
        Command::Verify { suite, out } => {
            no_overrides(&cli, "verify")?;
            let suite: Suite = suite.parse()?;
            let seed = cli.seed.unwrap_or(0);
            eprintln!("resolved config: {}", json!({"suite": suite, "seed": seed}));
            let checks = run_suite(suite, seed)?;
            let pass = checks.iter().all(|c| c.pass);
            let report = json!({"suite": suite, "seed": seed, "pass": pass, "checks": checks});
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(path) = out {
                write_json(&report, path)?;
            }
            if !pass {
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

fn summarise(agg: &survdd::sweep::Aggregate, threshold: Option<usize>) {
    println!(
        "{:>6} {:>8} {:>12} {:>12} {:>10}",
        "width", "d", "train", "test", "||W||"
    );
    for p in &agg.points {
        println!(
            "{:>6} {:>8} {:>12.6} {:>12.6} {:>10.4}",
            p.width, p.d, p.train_loss, p.test_loss, p.w_norm
        );
    }
    match threshold {
        Some(w) => println!("interpolation threshold: width {w}"),
        None => println!("interpolation threshold: not reached"),
    }
    println!(
        "diverged runs: {}; monotonicity violations: {:?}",
        agg.diverged, agg.monotonicity_violations
    );
}
