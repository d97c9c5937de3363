//! End-to-end experiments: configuration, the per-trial runner for all arms, CSV artifacts,
//! checkpoints and replay.

pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod runner;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{
    ArmsConfig, EvalConfig, ExperimentConfig, LearnerConfig, OutputConfig, ScenarioConfig,
};
pub use csvio::{ingest_constraints, write_constraints, AggregateRow, ConstraintReader};
pub use runner::{
    aggregate, checkpoint_round_trip, replay, run_experiment, run_trial, ArmKind, ArmSeries,
    ArmStep, RunSummary, StepOutcome, TrialResult, TrialRunner, TrialSeeds,
};
