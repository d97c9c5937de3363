//! Synthetic nonstationary scenario: two independent clusterings in disjoint subspaces,
//! random rotation drift and switches between the clusterings.

pub mod dataset;
pub mod rotation;
pub mod scenario;

pub use dataset::{generate_dataset, DatasetConfig, Partition, SyntheticDataset};
pub use rotation::rotation_step;
pub use scenario::{
    comparator_metric, run_scenario, sample_constraint, ComparatorCalibration, DriftScenario,
    GroundTruth, PairingPolicy, ScenarioStep, ScenarioStream, Segment, StreamState,
};
