use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use ocelad::experiment::{self, ArmKind, ExperimentConfig, RunSummary};

/// Online tracking of a drifting Mahalanobis metric with RICE-OCELAD.
#[derive(Parser, Debug)]
#[command(name = "ocelad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of trials (overrides the config).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory (overrides the config and OCELAD_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run all trials of an experiment.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-run one trial on a recorded constraint CSV.
    Replay {
        config: PathBuf,
        constraints: PathBuf,
        /// Trial whose dataset and ground truth are regenerated for evaluation.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check that checkpoint/restore reproduces an uninterrupted run exactly.
    CheckpointTest {
        /// Experiment config; a small built-in scenario is used when omitted.
        config: Option<PathBuf>,
        /// Step after which the checkpoint is taken (default: half the horizon).
        #[arg(long)]
        at: Option<u64>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn apply(mut cfg: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = o.trials {
        cfg.trials = trials;
    }
    if let Some(dir) = &o.out_dir {
        cfg.output.dir = dir.clone();
    } else if let Some(dir) = std::env::var_os("OCELAD_OUT_DIR") {
        cfg.output.dir = PathBuf::from(dir);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig> {
    let cfg =
        ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    apply(cfg, o)
}

fn smoke_config() -> ExperimentConfig {
    let text = r#"
        trials = 1
        [dataset]
        n_pts = 120
        n = 6
        [[scenario.segments]]
        duration = 60
        partition = "A"
        drift_rate = 0.0
        [[scenario.segments]]
        duration = 60
        partition = "B"
        drift_rate = 0.01
        [eval]
        eval_every = 20
        restarts = 3
    "#;
    ExperimentConfig::from_toml_str(text).expect("built-in config is valid")
}

fn report(summary: &RunSummary) {
    for arm in &summary.arms {
        let rows = &summary.aggregates[arm];
        if let Some(last) = rows.last() {
            println!(
                "{:<12} t={:<7} knn_error={:.4} p_nmi={} loss={:.4}",
                arm.as_str(),
                last.t,
                last.mean_knn_error.unwrap_or(f64::NAN),
                last.p_nmi_exceeds
                    .map_or("-".to_string(), |p| format!("{p:.3}")),
                last.mean_combined_loss
            );
        }
    }
    println!("artifacts written to {}", summary.out_dir.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            info!(
                "running {} trial(s) of {} steps, arms {:?}",
                cfg.trials,
                cfg.horizon(),
                ArmKind::enabled(&cfg)
            );
            let summary = experiment::run_experiment(&cfg)?;
            report(&summary);
            Ok(true)
        }
        Command::Replay {
            config,
            constraints,
            trial,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let stream = experiment::ingest_constraints(&constraints)
                .with_context(|| format!("reading {}", constraints.display()))?;
            info!("replaying {} constraints on trial {trial}", stream.len());
            let summary = experiment::replay(&cfg, trial, &stream)?;
            report(&summary);
            Ok(true)
        }
        Command::CheckpointTest {
            config,
            at,
            overrides,
        } => {
            let cfg = match &config {
                Some(path) => load(path, &overrides)?,
                None => apply(smoke_config(), &overrides)?,
            };
            std::fs::create_dir_all(&cfg.output.dir)?;
            let at = at.unwrap_or(cfg.horizon() / 2);
            let path = cfg.output.dir.join("checkpoint_test.json");
            let same = experiment::checkpoint_round_trip(&cfg, at, &path)?;
            if same {
                println!("checkpoint round trip at t={at}: identical");
            } else {
                println!("checkpoint round trip at t={at}: MISMATCH");
            }
            Ok(same)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
