use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metric::{LossConfig, Regularizer};
use crate::rice::RiceConfig;
use crate::sim::{DatasetConfig, DriftScenario, PairingPolicy, Segment};
use crate::{Error, Result};

/// Steps per segment of the default drift profile.
pub const PROFILE_SEGMENT_STEPS: u64 = 1500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub segments: Vec<Segment>,
    pub pairing: PairingPolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            segments: DriftScenario::standard_profile(PROFILE_SEGMENT_STEPS, 0).segments,
            pairing: PairingPolicy::Balanced,
        }
    }
}

impl ScenarioConfig {
    pub fn horizon(&self) -> u64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn scenario(&self, seed: u64) -> DriftScenario {
        DriftScenario {
            segments: self.segments.clone(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub eta0: f64,
    pub i0: u64,
    pub max_level: u32,
    pub rho: f64,
    pub regularizer: Regularizer,
    pub mu0: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            eta0: 0.005,
            i0: 1,
            max_level: 14,
            rho: 0.3,
            regularizer: Regularizer::NuclearNorm,
            mu0: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn loss(&self) -> Result<LossConfig<f64>> {
        LossConfig::new(self.rho, self.regularizer)
    }

    pub fn rice(&self) -> Result<RiceConfig<f64>> {
        let cfg = RiceConfig {
            i0: self.i0,
            eta0: self.eta0,
            max_level: self.max_level,
            mu0: self.mu0,
            loss: self.loss()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which learners run on each trial's stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmsConfig {
    pub rice_ocelad: bool,
    pub comid_high: bool,
    pub comid_low: bool,
    /// Fixed rate of the high-rate COMID arm.
    pub high_rate: f64,
    /// Fixed rate of the low-rate COMID arm.
    pub low_rate: f64,
}

impl Default for ArmsConfig {
    fn default() -> Self {
        Self {
            rice_ocelad: true,
            comid_high: true,
            comid_low: true,
            high_rate: 0.005,
            low_rate: 2e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Neighbours in the leave-one-out k-NN vote.
    pub k: usize,
    /// k-means cluster count; 0 uses the active partition's cluster count.
    pub clusters: usize,
    pub restarts: usize,
    /// Embedding dimension for clustering (capped at the ambient dimension).
    pub d_embed: usize,
    pub nmi_threshold: f64,
    pub eval_every: u64,
    /// Skip k-means/NMI and evaluate k-NN error only.
    pub knn_only: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 5,
            clusters: 0,
            restarts: 10,
            d_embed: 5,
            nmi_threshold: 0.8,
            eval_every: 10,
            knn_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub constraints: bool,
    pub regret: bool,
    pub checkpoints: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            constraints: true,
            regret: true,
            checkpoints: true,
        }
    }
}

/// Full experiment description, loadable from TOML. Every field has a default.
///
/// `dataset.seed` and the scenario seed are not read from the file: each trial derives its own
/// from the master `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub dataset: DatasetConfig,
    pub scenario: ScenarioConfig,
    pub learner: LearnerConfig,
    pub arms: ArmsConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 50,
            dataset: DatasetConfig::default(),
            scenario: ScenarioConfig::default(),
            learner: LearnerConfig::default(),
            arms: ArmsConfig::default(),
            eval: EvalConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn horizon(&self) -> u64 {
        self.scenario.horizon()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        self.dataset.validate()?;
        self.scenario.scenario(0).validate()?;
        self.learner.rice()?;
        let arms = &self.arms;
        if !(arms.rice_ocelad || arms.comid_high || arms.comid_low) {
            return Err(Error::InvalidConfig(
                "at least one arm must be enabled".into(),
            ));
        }
        for (name, rate) in [
            ("arms.high_rate", arms.high_rate),
            ("arms.low_rate", arms.low_rate),
        ] {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and > 0"
                )));
            }
        }
        let ev = &self.eval;
        if ev.k == 0 || ev.k >= self.dataset.n_pts {
            return Err(Error::InvalidConfig(format!(
                "eval.k must satisfy 1 <= k < n_pts ({})",
                self.dataset.n_pts
            )));
        }
        let max_clusters = self
            .dataset
            .proportions_a
            .len()
            .max(self.dataset.proportions_b.len());
        if ev.clusters > self.dataset.n_pts
            || (ev.clusters == 0 && max_clusters > self.dataset.n_pts)
        {
            return Err(Error::InvalidConfig("eval.clusters exceeds n_pts".into()));
        }
        if ev.d_embed == 0 {
            return Err(Error::InvalidConfig("eval.d_embed must be >= 1".into()));
        }
        if ev.eval_every == 0 {
            return Err(Error::InvalidConfig("eval.eval_every must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&ev.nmi_threshold) {
            return Err(Error::InvalidConfig(
                "eval.nmi_threshold must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Partition;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.dataset.n, 25);
        assert_eq!(cfg.scenario.segments.len(), 5);
        assert_eq!(cfg.learner.i0, 1);
    }

    #[test]
    fn nested_tables_parse() {
        let text = r#"
            seed = 9
            trials = 2
            [dataset]
            n_pts = 40
            n = 4
            k_sub = 2
            [[scenario.segments]]
            duration = 16
            partition = "A"
            drift_rate = 0.0
            [learner]
            regularizer = "elementwise_l1"
            [eval]
            k = 3
            eval_every = 1
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.horizon(), 16);
        assert_eq!(cfg.scenario.segments[0].partition, Partition::A);
        assert_eq!(cfg.learner.regularizer, Regularizer::ElementwiseL1);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("trials = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[dataset]\nn = 4\nk_sub = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("[learner]\neta0 = -1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[eval]\neval_every = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("unknown_key = 1").is_err());
    }
}
