//! Trial runner: drives the scenario stream through every enabled arm, evaluates the learned
//! metrics periodically, and writes the CSV artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{ArmRecord, Checkpoint, StateRecord, CHECKPOINT_VERSION};
use super::config::ExperimentConfig;
use super::csvio::{self, AggregateRow, DriftRow, RegretRow, RegretWriter, StepRow, StepWriter};
use crate::comid::ComidLearner;
use crate::eval::{embedding_from_metric, kmeans_with_restarts, knn_error_with_metric, nmi};
use crate::linalg;
use crate::metric::{composite_loss, hinge_loss, Constraint, MetricState};
use crate::sim::{
    generate_dataset, ComparatorCalibration, Partition, ScenarioStep, ScenarioStream,
    SyntheticDataset,
};
use crate::tracker::RiceOcelad;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    RiceOcelad,
    ComidHigh,
    ComidLow,
}

impl ArmKind {
    pub const ALL: [ArmKind; 3] = [ArmKind::RiceOcelad, ArmKind::ComidHigh, ArmKind::ComidLow];

    pub fn as_str(self) -> &'static str {
        match self {
            ArmKind::RiceOcelad => "rice_ocelad",
            ArmKind::ComidHigh => "comid_high",
            ArmKind::ComidLow => "comid_low",
        }
    }

    pub fn enabled(cfg: &ExperimentConfig) -> Vec<ArmKind> {
        Self::ALL
            .into_iter()
            .filter(|a| match a {
                ArmKind::RiceOcelad => cfg.arms.rice_ocelad,
                ArmKind::ComidHigh => cfg.arms.comid_high,
                ArmKind::ComidLow => cfg.arms.comid_low,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Learner {
    Rice(RiceOcelad<f64>),
    Comid(ComidLearner<f64>),
}

impl Learner {
    fn estimate(&self) -> &MetricState<f64> {
        match self {
            Learner::Rice(r) => r.estimate(),
            Learner::Comid(c) => c.state(),
        }
    }
}

/// Independent seeds for one trial, derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub dataset: u64,
    pub scenario: u64,
    pub kmeans: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(trial as u64 + 1);
        Self {
            dataset: rng.next_u64(),
            scenario: rng.next_u64(),
            kmeans: rng.next_u64(),
        }
    }
}

/// One arm's view of a step.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmStep {
    pub arm: ArmKind,
    /// Hinge loss of the post-update estimate on this step's constraint.
    pub combined_loss: f64,
    /// `f_t` of the estimate held before this step's constraint arrived.
    pub algorithm_loss: f64,
    pub knn_error: Option<f64>,
    pub nmi: Option<f64>,
    /// `(level, normalized weight)`; empty for single-learner arms.
    pub weights: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub t: u64,
    pub segment: usize,
    pub partition: Partition,
    pub drift_rate: f64,
    pub constraint: Constraint<f64>,
    pub comparator_loss: f64,
    pub comparator_step: f64,
    pub metric_change: f64,
    pub arms: Vec<ArmStep>,
}

/// A single trial: its dataset, scenario stream and one learner per enabled arm.
pub struct TrialRunner {
    cfg: ExperimentConfig,
    trial: usize,
    seeds: TrialSeeds,
    data: Arc<SyntheticDataset>,
    stream: ScenarioStream,
    calibration: [ComparatorCalibration; 2],
    arms: Vec<(ArmKind, Learner)>,
    prev_comparator: Option<MetricState<f64>>,
}

fn calibrations(data: &SyntheticDataset) -> [ComparatorCalibration; 2] {
    [
        ComparatorCalibration::new(data, Partition::A),
        ComparatorCalibration::new(data, Partition::B),
    ]
}

impl TrialRunner {
    fn dataset_for(cfg: &ExperimentConfig, seeds: &TrialSeeds) -> Result<Arc<SyntheticDataset>> {
        let mut dcfg = cfg.dataset.clone();
        dcfg.seed = seeds.dataset;
        Ok(Arc::new(generate_dataset(&dcfg)?))
    }

    pub fn new(cfg: &ExperimentConfig, trial: usize) -> Result<Self> {
        cfg.validate()?;
        let seeds = TrialSeeds::derive(cfg.seed, trial);
        let data = Self::dataset_for(cfg, &seeds)?;
        let n = data.dim();
        let stream = ScenarioStream::new(
            Arc::clone(&data),
            cfg.scenario.scenario(seeds.scenario),
            cfg.scenario.pairing,
        )?;
        let loss = cfg.learner.loss()?;
        let mut arms = Vec::new();
        for arm in ArmKind::enabled(cfg) {
            let learner = match arm {
                ArmKind::RiceOcelad => Learner::Rice(RiceOcelad::new(n, cfg.learner.rice()?)?),
                ArmKind::ComidHigh => Learner::Comid(ComidLearner::identity_start(
                    n,
                    cfg.learner.mu0,
                    cfg.arms.high_rate,
                    loss,
                )?),
                ArmKind::ComidLow => Learner::Comid(ComidLearner::identity_start(
                    n,
                    cfg.learner.mu0,
                    cfg.arms.low_rate,
                    loss,
                )?),
            };
            arms.push((arm, learner));
        }
        Ok(Self {
            cfg: cfg.clone(),
            trial,
            seeds,
            calibration: calibrations(&data),
            data,
            stream,
            arms,
            prev_comparator: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn trial(&self) -> usize {
        self.trial
    }

    pub fn dataset(&self) -> &SyntheticDataset {
        &self.data
    }

    pub fn next_t(&self) -> u64 {
        self.stream.next_t()
    }

    pub fn is_done(&self) -> bool {
        self.stream.next_t() > self.cfg.horizon()
    }

    pub fn arms(&self) -> Vec<ArmKind> {
        self.arms.iter().map(|(a, _)| *a).collect()
    }

    /// Current estimate of `arm`, if that arm is enabled.
    pub fn estimate(&self, arm: ArmKind) -> Option<&MetricState<f64>> {
        self.arms
            .iter()
            .find(|(a, _)| *a == arm)
            .map(|(_, l)| l.estimate())
    }

    /// Ground-truth metric at the most recent step.
    pub fn comparator(&self) -> Option<&MetricState<f64>> {
        self.prev_comparator.as_ref()
    }

    /// Advances one step on the simulated constraint. `None` once the scenario is exhausted.
    pub fn step(&mut self) -> Result<Option<StepOutcome>> {
        match self.stream.next() {
            None => Ok(None),
            Some(step) => {
                let step = step?;
                let c = step.constraint.clone();
                self.apply(step, c).map(Some)
            }
        }
    }

    /// Advances one step but feeds the learners `c` instead of the simulated constraint. The
    /// simulation still advances so that evaluation sees the matching ground truth.
    pub fn step_with(&mut self, c: Constraint<f64>) -> Result<StepOutcome> {
        let t = self.stream.next_t();
        if c.t() != t {
            return Err(Error::OutOfOrder {
                expected: t,
                got: c.t(),
            });
        }
        if c.dim() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: c.dim(),
            });
        }
        let step = self.stream.next().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "constraint stream is longer than the scenario horizon ({})",
                self.cfg.horizon()
            ))
        })??;
        self.apply(step, c)
    }

    fn apply(&mut self, step: ScenarioStep, c: Constraint<f64>) -> Result<StepOutcome> {
        let t = step.truth.t;
        let loss_cfg = self.cfg.learner.loss()?;
        let calib = match step.truth.partition {
            Partition::A => &self.calibration[0],
            Partition::B => &self.calibration[1],
        };
        let comparator = calib.metric(&self.data, &step.truth.rotation)?;
        let comparator_loss = composite_loss(&comparator, &c, &loss_cfg)?;
        let (comparator_step, metric_change) = match &self.prev_comparator {
            Some(prev) => {
                let diff = linalg::frobenius(&(comparator.matrix() - prev.matrix()));
                let norm = linalg::frobenius(comparator.matrix());
                (
                    comparator.distance(prev),
                    if norm > 0.0 { diff / norm } else { 0.0 },
                )
            }
            None => (0.0, 0.0),
        };

        let evaluate = t.is_multiple_of(self.cfg.eval.eval_every);
        let mut arm_steps = Vec::with_capacity(self.arms.len());
        for (arm, learner) in &mut self.arms {
            let prior_loss = composite_loss(learner.estimate(), &c, &loss_cfg)?;
            let weights = match learner {
                Learner::Rice(r) => {
                    let out = r.step(&c)?;
                    let norm = out.weights.normalized();
                    norm.iter().map(|(iv, w)| (iv.level, *w)).collect()
                }
                Learner::Comid(l) => {
                    l.update(&c)?;
                    Vec::new()
                }
            };
            let combined_loss = hinge_loss(learner.estimate(), &c)?;
            arm_steps.push(ArmStep {
                arm: *arm,
                combined_loss,
                algorithm_loss: prior_loss,
                knn_error: None,
                nmi: None,
                weights,
            });
        }
        if evaluate {
            for (slot, (_, learner)) in arm_steps.iter_mut().zip(&self.arms) {
                let (knn, nmi) = self.evaluate(learner.estimate(), &step, t)?;
                slot.knn_error = Some(knn);
                slot.nmi = nmi;
            }
        }
        self.prev_comparator = Some(comparator);
        Ok(StepOutcome {
            t,
            segment: step.truth.segment,
            partition: step.truth.partition,
            drift_rate: step.truth.drift_rate,
            constraint: c,
            comparator_loss,
            comparator_step,
            metric_change,
            arms: arm_steps,
        })
    }

    fn evaluate(
        &self,
        est: &MetricState<f64>,
        step: &ScenarioStep,
        t: u64,
    ) -> Result<(f64, Option<f64>)> {
        let ev = &self.cfg.eval;
        let points = step.truth.points.as_ref();
        let labels = self.data.labels(step.truth.partition);
        let knn = knn_error_with_metric(est.matrix(), points, labels, ev.k)
            .map_err(|e| e.at_step(t, "eval"))?;
        if ev.knn_only {
            return Ok((knn, None));
        }
        let clusters = if ev.clusters == 0 {
            self.data.n_clusters(step.truth.partition)
        } else {
            ev.clusters
        };
        let d = ev.d_embed.min(self.data.dim());
        let embedded = embedding_from_metric(est.matrix(), d)
            .and_then(|e| e.embed(points))
            .map_err(|e| e.at_step(t, "eval"))?;
        let km = kmeans_with_restarts(
            &embedded,
            clusters,
            self.seeds.kmeans.wrapping_add(t),
            ev.restarts,
        )
        .map_err(|e| e.at_step(t, "eval"))?;
        let score = nmi(labels, &km.labels).map_err(|e| e.at_step(t, "eval"))?;
        Ok((knn, Some(score)))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            trial: self.trial,
            config: self.cfg.clone(),
            stream: self.stream.state(),
            prev_comparator: self.prev_comparator.as_ref().map(StateRecord::from_state),
            arms: self
                .arms
                .iter()
                .map(|(arm, l)| match l {
                    Learner::Rice(r) => ArmRecord::from_rice(*arm, r),
                    Learner::Comid(c) => ArmRecord::from_comid(*arm, c),
                })
                .collect(),
        }
    }

    /// Rebuilds a runner from a checkpoint. Fails without partial state on any mismatch.
    pub fn restore(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        let cfg = ckpt.config;
        cfg.validate()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let seeds = TrialSeeds::derive(cfg.seed, ckpt.trial);
        let data = Self::dataset_for(&cfg, &seeds)?;
        let n = data.dim();
        let stream = ScenarioStream::restore(
            Arc::clone(&data),
            cfg.scenario.scenario(seeds.scenario),
            cfg.scenario.pairing,
            ckpt.stream,
        )
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let expected = ArmKind::enabled(&cfg);
        let got: Vec<_> = ckpt.arms.iter().map(|a| a.arm()).collect();
        if got != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint arms {got:?} do not match the configured arms {expected:?}"
            )));
        }
        let mut arms = Vec::new();
        for rec in &ckpt.arms {
            let learner = match rec.arm() {
                ArmKind::RiceOcelad => {
                    let r = rec.to_rice(&cfg, n)?;
                    if r.next_t() != stream.next_t() {
                        return Err(Error::Checkpoint(
                            "tracker and stream are at different steps".into(),
                        ));
                    }
                    Learner::Rice(r)
                }
                ArmKind::ComidHigh | ArmKind::ComidLow => Learner::Comid(rec.to_comid(&cfg, n)?),
            };
            arms.push((rec.arm(), learner));
        }
        let prev_comparator = match &ckpt.prev_comparator {
            Some(s) => Some(s.to_state(n)?),
            None if stream.next_t() > 1 => {
                return Err(Error::Checkpoint("missing comparator state".into()));
            }
            None => None,
        };
        Ok(Self {
            cfg,
            trial: ckpt.trial,
            seeds,
            calibration: calibrations(&data),
            data,
            stream,
            arms,
            prev_comparator,
        })
    }
}

/// Evaluation series of one arm in one trial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArmSeries {
    pub t: Vec<u64>,
    pub knn_error: Vec<f64>,
    pub nmi: Vec<Option<f64>>,
    /// Mean combined loss over the steps since the previous evaluation.
    pub window_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub series: BTreeMap<ArmKind, ArmSeries>,
}

/// Runs a whole trial, calling `on_step` after every step.
pub fn run_trial<F>(cfg: &ExperimentConfig, trial: usize, mut on_step: F) -> Result<TrialResult>
where
    F: FnMut(&StepOutcome) -> Result<()>,
{
    let mut runner = TrialRunner::new(cfg, trial)?;
    let mut result = TrialResult {
        trial,
        series: runner
            .arms()
            .into_iter()
            .map(|a| (a, ArmSeries::default()))
            .collect(),
    };
    let mut loss_acc: BTreeMap<ArmKind, (f64, usize)> = BTreeMap::new();
    while let Some(out) = runner.step()? {
        collect(&mut result, &mut loss_acc, &out);
        on_step(&out)?;
    }
    Ok(result)
}

fn collect(
    result: &mut TrialResult,
    loss_acc: &mut BTreeMap<ArmKind, (f64, usize)>,
    out: &StepOutcome,
) {
    for a in &out.arms {
        let acc = loss_acc.entry(a.arm).or_insert((0.0, 0));
        acc.0 += a.combined_loss;
        acc.1 += 1;
        if let Some(knn) = a.knn_error {
            let s = result.series.get_mut(&a.arm).expect("arm registered");
            s.t.push(out.t);
            s.knn_error.push(knn);
            s.nmi.push(a.nmi);
            s.window_loss.push(acc.0 / acc.1 as f64);
            *acc = (0.0, 0);
        }
    }
}

/// Means across trials at each evaluation step.
pub fn aggregate(results: &[TrialResult], arm: ArmKind, threshold: f64) -> Vec<AggregateRow> {
    let series: Vec<&ArmSeries> = results.iter().filter_map(|r| r.series.get(&arm)).collect();
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let count = series.len() as f64;
    (0..first.t.len())
        .map(|i| {
            let knn = series.iter().map(|s| s.knn_error[i]).sum::<f64>() / count;
            let nmis: Option<Vec<f64>> = series.iter().map(|s| s.nmi[i]).collect();
            let p = nmis.map(|v| crate::eval::exceedance_probability(&v, threshold));
            let loss = series.iter().map(|s| s.window_loss[i]).sum::<f64>() / count;
            AggregateRow {
                t: first.t[i],
                mean_knn_error: Some(knn),
                p_nmi_exceeds: p,
                mean_combined_loss: loss,
            }
        })
        .collect()
}

/// Paths and aggregates produced by [`run_experiment`] or [`replay`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub arms: Vec<ArmKind>,
    pub aggregates: BTreeMap<ArmKind, Vec<AggregateRow>>,
    pub results: Vec<TrialResult>,
}

struct TrialFiles {
    steps: BTreeMap<ArmKind, StepWriter<BufWriter<File>>>,
    regret: BTreeMap<ArmKind, RegretWriter<BufWriter<File>>>,
    constraints: Vec<Constraint<f64>>,
    drift: Vec<DriftRow>,
}

fn part_path(dir: &Path, stem: &str, arm: ArmKind, trial: usize) -> PathBuf {
    dir.join(format!(".{stem}_{}.trial{trial}.part", arm.as_str()))
}

impl TrialFiles {
    fn open(cfg: &ExperimentConfig, dir: &Path, trial: usize) -> Result<Self> {
        let mut steps = BTreeMap::new();
        let mut regret = BTreeMap::new();
        for arm in ArmKind::enabled(cfg) {
            let f = BufWriter::new(File::create(part_path(dir, "steps", arm, trial))?);
            steps.insert(arm, StepWriter::new(f, false)?);
            if cfg.output.regret {
                let f = BufWriter::new(File::create(part_path(dir, "regret", arm, trial))?);
                regret.insert(arm, RegretWriter::new(f, false)?);
            }
        }
        Ok(Self {
            steps,
            regret,
            constraints: Vec::new(),
            drift: Vec::new(),
        })
    }

    fn record(&mut self, cfg: &ExperimentConfig, trial: usize, out: &StepOutcome) -> Result<()> {
        for a in &out.arms {
            if let Some(w) = self.steps.get_mut(&a.arm) {
                w.write(&StepRow {
                    trial,
                    t: out.t,
                    combined_loss: a.combined_loss,
                    knn_error: a.knn_error,
                    nmi: a.nmi,
                    weights: a.weights.clone(),
                })?;
            }
            if let Some(w) = self.regret.get_mut(&a.arm) {
                w.write(&RegretRow {
                    trial,
                    t: out.t,
                    algorithm_loss: a.algorithm_loss,
                    comparator_loss: out.comparator_loss,
                    comparator_step: out.comparator_step,
                })?;
            }
        }
        if cfg.output.constraints {
            self.constraints.push(out.constraint.clone());
        }
        if trial == 0 {
            self.drift.push(DriftRow {
                t: out.t,
                segment: out.segment,
                partition: out.partition.as_str(),
                drift_rate: out.drift_rate,
                metric_change: out.metric_change,
            });
        }
        Ok(())
    }

    fn finish(self, cfg: &ExperimentConfig, dir: &Path, trial: usize) -> Result<()> {
        for (_, w) in self.steps {
            w.finish()?.flush()?;
        }
        for (_, w) in self.regret {
            w.finish()?;
        }
        if cfg.output.constraints {
            csvio::write_constraints_file(
                &dir.join(format!("constraints_trial{trial}.csv")),
                &self.constraints,
            )?;
        }
        if trial == 0 {
            csvio::write_drift_profile(File::create(dir.join("drift_profile.csv"))?, &self.drift)?;
        }
        Ok(())
    }
}

fn merge_parts(
    dir: &Path,
    stem: &str,
    header: &[&str],
    arm: ArmKind,
    trials: &[usize],
) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}_{}.csv", arm.as_str()));
    let mut out = BufWriter::new(File::create(&path)?);
    writeln!(out, "{}", header.join(","))?;
    for &trial in trials {
        let part = part_path(dir, stem, arm, trial);
        let mut f = File::open(&part)?;
        std::io::copy(&mut f, &mut out)?;
        std::fs::remove_file(&part)?;
    }
    out.flush()?;
    Ok(path)
}

fn write_outputs(
    cfg: &ExperimentConfig,
    dir: &Path,
    trials: &[usize],
    results: Vec<TrialResult>,
) -> Result<RunSummary> {
    let arms = ArmKind::enabled(cfg);
    let mut aggregates = BTreeMap::new();
    for &arm in &arms {
        merge_parts(dir, "steps", &csvio::STEP_HEADER, arm, trials)?;
        if cfg.output.regret {
            merge_parts(dir, "regret", &csvio::REGRET_HEADER, arm, trials)?;
        }
        let rows = aggregate(&results, arm, cfg.eval.nmi_threshold);
        csvio::write_aggregate(
            File::create(dir.join(format!("aggregate_{}.csv", arm.as_str())))?,
            &rows,
        )?;
        aggregates.insert(arm, rows);
    }
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        arms,
        aggregates,
        results,
    })
}

/// Runs every trial (in parallel), writing per-trial step/regret/constraint CSVs, the
/// trial-aggregated CSVs, the drift profile and a final checkpoint per trial under
/// `cfg.output.dir`. Outputs are identical for identical configurations.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let trials: Vec<usize> = (0..cfg.trials).collect();
    let results = trials
        .par_iter()
        .map(|&trial| {
            let mut files = TrialFiles::open(cfg, &dir, trial)?;
            let mut runner = TrialRunner::new(cfg, trial)?;
            let mut result = TrialResult {
                trial,
                series: runner
                    .arms()
                    .into_iter()
                    .map(|a| (a, ArmSeries::default()))
                    .collect(),
            };
            let mut loss_acc = BTreeMap::new();
            while let Some(out) = runner.step()? {
                collect(&mut result, &mut loss_acc, &out);
                files.record(cfg, trial, &out)?;
            }
            files.finish(cfg, &dir, trial)?;
            if cfg.output.checkpoints {
                runner
                    .checkpoint()
                    .save(&dir.join(format!("checkpoint_trial{trial}.json")))?;
            }
            Ok(result)
        })
        .collect::<Result<Vec<_>>>()?;
    write_outputs(cfg, &dir, &trials, results)
}

/// Re-runs trial `trial` of `cfg` on a recorded constraint stream, writing the same artifacts
/// as [`run_experiment`] under `cfg.output.dir`.
pub fn replay(
    cfg: &ExperimentConfig,
    trial: usize,
    constraints: &[Constraint<f64>],
) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut files = TrialFiles::open(cfg, &dir, trial)?;
    let mut runner = TrialRunner::new(cfg, trial)?;
    let mut result = TrialResult {
        trial,
        series: runner
            .arms()
            .into_iter()
            .map(|a| (a, ArmSeries::default()))
            .collect(),
    };
    let mut loss_acc = BTreeMap::new();
    for c in constraints {
        let out = runner.step_with(c.clone())?;
        collect(&mut result, &mut loss_acc, &out);
        files.record(cfg, trial, &out)?;
    }
    files.finish(cfg, &dir, trial)?;
    if cfg.output.checkpoints {
        runner
            .checkpoint()
            .save(&dir.join(format!("checkpoint_trial{trial}.json")))?;
    }
    write_outputs(cfg, &dir, &[trial], vec![result])
}

/// Runs trial 0 to step `at`, checkpoints to `path`, restores from the file and finishes the
/// run; returns whether every later step matches an uninterrupted run exactly.
pub fn checkpoint_round_trip(cfg: &ExperimentConfig, at: u64, path: &Path) -> Result<bool> {
    let mut reference = Vec::new();
    run_trial(cfg, 0, |out| {
        if out.t > at {
            reference.push(out.clone());
        }
        Ok(())
    })?;

    let mut runner = TrialRunner::new(cfg, 0)?;
    while runner.next_t() <= at {
        if runner.step()?.is_none() {
            break;
        }
    }
    runner.checkpoint().save(path)?;
    drop(runner);
    let mut resumed = TrialRunner::restore(Checkpoint::load(path)?)?;
    let mut after = Vec::new();
    while let Some(out) = resumed.step()? {
        after.push(out);
    }
    Ok(after == reference)
}
