//! Versioned JSON checkpoints of a running trial: scenario cursor (including RNG state),
//! every arm's learner state and the previous ground-truth comparator. Matrices are stored as
//! flat row-major arrays.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::ArmKind;
use crate::comid::ComidLearner;
use crate::dyadic::DyadicInterval;
use crate::metric::MetricState;
use crate::ocelad::EnsembleWeights;
use crate::rice::RiceEnsemble;
use crate::sim::StreamState;
use crate::tracker::RiceOcelad;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub n: usize,
    /// Row-major `n × n`.
    pub m: Vec<f64>,
    pub mu: f64,
}

impl StateRecord {
    pub fn from_state(s: &MetricState<f64>) -> Self {
        let n = s.dim();
        let m = s.matrix();
        Self {
            n,
            m: (0..n)
                .flat_map(|i| (0..n).map(move |j| m[(i, j)]))
                .collect(),
            mu: s.mu(),
        }
    }

    pub fn to_state(&self, n: usize) -> Result<MetricState<f64>> {
        if self.n != n || self.m.len() != n * n {
            return Err(Error::Checkpoint(format!(
                "matrix shape {}x{} (len {}) does not match dimension {n}",
                self.n,
                self.n,
                self.m.len()
            )));
        }
        MetricState::new(DMatrix::from_row_slice(n, n, &self.m), self.mu)
            .map_err(|e| Error::Checkpoint(format!("invalid metric state: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerRecord {
    pub interval: DyadicInterval,
    pub eta: f64,
    pub state: StateRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmRecord {
    Rice {
        arm: ArmKind,
        next_t: u64,
        active: Vec<LearnerRecord>,
        last_estimate: Vec<(u32, StateRecord)>,
        weights: Vec<(DyadicInterval, f64)>,
        current: StateRecord,
    },
    Comid {
        arm: ArmKind,
        eta: f64,
        state: StateRecord,
    },
}

impl ArmRecord {
    pub fn arm(&self) -> ArmKind {
        match self {
            ArmRecord::Rice { arm, .. } | ArmRecord::Comid { arm, .. } => *arm,
        }
    }

    pub fn from_rice(arm: ArmKind, tracker: &RiceOcelad<f64>) -> Self {
        let ens = tracker.ensemble();
        ArmRecord::Rice {
            arm,
            next_t: ens.next_t(),
            active: ens
                .active()
                .iter()
                .map(|(iv, l)| LearnerRecord {
                    interval: *iv,
                    eta: l.eta(),
                    state: StateRecord::from_state(l.state()),
                })
                .collect(),
            last_estimate: ens
                .last_estimates()
                .iter()
                .map(|(level, s)| (*level, StateRecord::from_state(s)))
                .collect(),
            weights: tracker
                .weights()
                .entries()
                .iter()
                .map(|(iv, w)| (*iv, *w))
                .collect(),
            current: StateRecord::from_state(tracker.estimate()),
        }
    }

    pub fn from_comid(arm: ArmKind, learner: &ComidLearner<f64>) -> Self {
        ArmRecord::Comid {
            arm,
            eta: learner.eta(),
            state: StateRecord::from_state(learner.state()),
        }
    }

    /// Rebuilds a RICE-OCELAD tracker, validating it against `cfg`.
    pub fn to_rice(&self, cfg: &ExperimentConfig, n: usize) -> Result<RiceOcelad<f64>> {
        let ArmRecord::Rice {
            next_t,
            active,
            last_estimate,
            weights,
            current,
            ..
        } = self
        else {
            return Err(Error::Checkpoint(
                "expected a RICE-OCELAD arm record".into(),
            ));
        };
        let rice_cfg = cfg.learner.rice()?;
        let loss = cfg.learner.loss()?;
        let mut learners = BTreeMap::new();
        for rec in active {
            let learner = ComidLearner::new(rec.state.to_state(n)?, rec.eta, loss)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            learners.insert(rec.interval, learner);
        }
        let mut last = BTreeMap::new();
        for (level, s) in last_estimate {
            last.insert(*level, s.to_state(n)?);
        }
        let ensemble = RiceEnsemble::from_parts(n, rice_cfg, *next_t, learners, last)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let weights = EnsembleWeights::from_entries(weights.iter().copied().collect())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        RiceOcelad::from_parts(ensemble, weights, current.to_state(n)?)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn to_comid(&self, cfg: &ExperimentConfig, n: usize) -> Result<ComidLearner<f64>> {
        let ArmRecord::Comid { eta, state, .. } = self else {
            return Err(Error::Checkpoint("expected a COMID arm record".into()));
        };
        ComidLearner::new(state.to_state(n)?, *eta, cfg.learner.loss()?)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub trial: usize,
    pub config: ExperimentConfig,
    pub stream: StreamState,
    pub prev_comparator: Option<StateRecord>,
    pub arms: Vec<ArmRecord>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            version: u32,
        }
        let v: Version = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if v.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                v.version
            )));
        }
        serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
