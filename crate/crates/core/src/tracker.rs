//! RICE-OCELAD: the retro-initialized ensemble driven through the adaptive combiner.
//!
//! Per step `t`: spawn/retire learners and apply the COMID update to every active learner,
//! combine their post-update estimates with the current weights, then update the weights with
//! the same step's losses and align them with the intervals active at `t + 1`.

use crate::dyadic::{active_intervals, DyadicInterval};
use crate::metric::{hinge_loss, Constraint, MetricState};
use crate::ocelad::{self, EnsembleWeights, LearnerOutput};
use crate::rice::{RiceConfig, RiceEnsemble};
use crate::{Error, Result, Scalar};

/// Everything produced by one tracker step.
#[derive(Clone, Debug)]
pub struct TrackStep<T: Scalar> {
    pub t: u64,
    /// Combined estimate available before the constraint of step `t` was seen.
    pub prior: MetricState<T>,
    /// Combined estimate after the step-`t` updates.
    pub estimate: MetricState<T>,
    /// Per-learner post-update estimates and losses, shortest scale first.
    pub outputs: Vec<LearnerOutput<T, MetricState<T>>>,
    /// Weights `w_t(I)` used to form `estimate`.
    pub weights: EnsembleWeights<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiceOcelad<T: Scalar> {
    ensemble: RiceEnsemble<T>,
    weights: EnsembleWeights<T>,
    current: MetricState<T>,
}

impl<T: Scalar> RiceOcelad<T> {
    pub fn new(dim: usize, cfg: RiceConfig<T>) -> Result<Self> {
        let ensemble = RiceEnsemble::new(dim, cfg)?;
        let weights = ocelad::sync_active(
            &EnsembleWeights::new(),
            &active_intervals(1, cfg.i0, cfg.max_level),
        );
        let current = MetricState::identity(dim, cfg.mu0)?;
        Ok(Self {
            ensemble,
            weights,
            current,
        })
    }

    /// Rebuilds a tracker from persisted parts; the weights must cover the intervals active at
    /// the ensemble's next step.
    pub fn from_parts(
        ensemble: RiceEnsemble<T>,
        weights: EnsembleWeights<T>,
        current: MetricState<T>,
    ) -> Result<Self> {
        let cfg = ensemble.config();
        let expected = active_intervals(ensemble.next_t(), cfg.i0, cfg.max_level);
        if weights.entries().keys().copied().collect::<Vec<_>>() != expected {
            return Err(Error::WeightMismatch);
        }
        if current.dim() != ensemble.dim() {
            return Err(Error::DimensionMismatch {
                expected: ensemble.dim(),
                got: current.dim(),
            });
        }
        current.validate()?;
        Ok(Self {
            ensemble,
            weights,
            current,
        })
    }

    pub fn ensemble(&self) -> &RiceEnsemble<T> {
        &self.ensemble
    }

    pub fn weights(&self) -> &EnsembleWeights<T> {
        &self.weights
    }

    /// Latest combined estimate (`(I, μ₀)` before the first step).
    pub fn estimate(&self) -> &MetricState<T> {
        &self.current
    }

    pub fn next_t(&self) -> u64 {
        self.ensemble.next_t()
    }

    /// Runs one step on `c` at the tracker's next step index.
    ///
    /// A returned error is fatal for the run: the ensemble may already have advanced.
    pub fn step(&mut self, c: &Constraint<T>) -> Result<TrackStep<T>> {
        let t = self.ensemble.next_t();
        let estimates = self.ensemble.step(t, c)?;
        let outputs = estimates
            .into_iter()
            .map(|(interval, state)| {
                let loss = hinge_loss(&state, c)?;
                Ok(LearnerOutput {
                    interval,
                    estimate: state,
                    loss,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_step(t, "ocelad"))?;
        let cfg = self.ensemble.config();
        let next_active: Vec<DyadicInterval> = active_intervals(t + 1, cfg.i0, cfg.max_level);
        let (estimate, next_weights) = ocelad::ocelad_step(&self.weights, &outputs, &next_active)
            .map_err(|e| e.at_step(t, "ocelad"))?;
        let used = std::mem::replace(&mut self.weights, next_weights);
        let prior = std::mem::replace(&mut self.current, estimate.clone());
        Ok(TrackStep {
            t,
            prior,
            estimate,
            outputs,
            weights: used,
        })
    }
}
