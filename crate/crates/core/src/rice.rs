//! Retro-initialized COMID ensemble.
//!
//! One COMID learner runs on every active dyadic interval with rate `η₀/√|I|`. When a level-`j`
//! interval starts, its learner is initialized from the final estimate of the most recently
//! finished level-`(j−1)` learner, so a long-scale learner begins already adapted to recent
//! data. A new level-0 learner continues from the previous level-0 learner; the very first
//! one starts at `(I, μ₀)`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::comid::ComidLearner;
use crate::dyadic::{active_intervals, DyadicInterval};
use crate::metric::{Constraint, LossConfig, MetricState};
use crate::{Error, Result, Scalar};

/// Learner updates fan out across threads once the matrices are at least this wide.
const PARALLEL_MIN_DIM: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiceConfig<T: Scalar> {
    pub i0: u64,
    pub eta0: T,
    pub max_level: u32,
    pub mu0: T,
    pub loss: LossConfig<T>,
}

impl<T: Scalar> RiceConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.i0 == 0 {
            return Err(Error::InvalidConfig(
                "base interval length i0 must be >= 1".into(),
            ));
        }
        if !self.eta0.is_finite_val() || self.eta0 <= T::zero() {
            return Err(Error::InvalidConfig("eta0 must be finite and > 0".into()));
        }
        if self.max_level > 62 {
            return Err(Error::InvalidConfig("max_level must be <= 62".into()));
        }
        if !self.mu0.is_finite_val() || self.mu0 < T::one() {
            return Err(Error::InvalidConfig("mu0 must be >= 1".into()));
        }
        Ok(())
    }

    /// `η₀/√|I|`.
    pub fn rate(&self, interval: &DyadicInterval) -> T {
        self.eta0 / T::lit(interval.len() as f64).sqrt()
    }
}

/// Post-update estimates of the active learners, shortest scale first.
pub type Estimates<T> = Vec<(DyadicInterval, MetricState<T>)>;

#[derive(Clone, Debug, PartialEq)]
pub struct RiceEnsemble<T: Scalar> {
    cfg: RiceConfig<T>,
    dim: usize,
    next_t: u64,
    active: BTreeMap<DyadicInterval, ComidLearner<T>>,
    last_estimate: BTreeMap<u32, MetricState<T>>,
}

impl<T: Scalar> RiceEnsemble<T> {
    pub fn new(dim: usize, cfg: RiceConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(Self {
            cfg,
            dim,
            next_t: 1,
            active: BTreeMap::new(),
            last_estimate: BTreeMap::new(),
        })
    }

    /// Reassembles an ensemble from persisted parts, re-checking every invariant.
    pub fn from_parts(
        dim: usize,
        cfg: RiceConfig<T>,
        next_t: u64,
        active: BTreeMap<DyadicInterval, ComidLearner<T>>,
        last_estimate: BTreeMap<u32, MetricState<T>>,
    ) -> Result<Self> {
        let mut ens = Self::new(dim, cfg)?;
        if next_t == 0 {
            return Err(Error::InvalidArgument("next step must be >= 1".into()));
        }
        let expected: Vec<_> = if next_t == 1 {
            Vec::new()
        } else {
            active_intervals(next_t - 1, cfg.i0, cfg.max_level)
        };
        if active.keys().copied().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidArgument(
                "active learners do not match the dyadic schedule".into(),
            ));
        }
        for (iv, learner) in &active {
            if learner.state().dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: learner.state().dim(),
                });
            }
            learner.state().validate()?;
            let rate = cfg.rate(iv);
            if (learner.eta() - rate).abs() > T::default_epsilon() * T::lit(16.0) * rate {
                return Err(Error::InvalidArgument(format!(
                    "learner {iv} has the wrong rate"
                )));
            }
        }
        for s in last_estimate.values() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
            s.validate()?;
        }
        ens.next_t = next_t;
        ens.active = active;
        ens.last_estimate = last_estimate;
        Ok(ens)
    }

    pub fn config(&self) -> &RiceConfig<T> {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn next_t(&self) -> u64 {
        self.next_t
    }

    pub fn active(&self) -> &BTreeMap<DyadicInterval, ComidLearner<T>> {
        &self.active
    }

    pub fn last_estimates(&self) -> &BTreeMap<u32, MetricState<T>> {
        &self.last_estimate
    }

    fn fresh_state(&self) -> Result<MetricState<T>> {
        MetricState::identity(self.dim, self.cfg.mu0)
    }

    /// Retires finished learners, spawns learners for intervals starting at `t`, then applies
    /// the COMID update with `c` to every active learner.
    ///
    /// Returns each active learner's post-update estimate, shortest scale first. The ensemble
    /// is left unchanged when an error is returned.
    pub fn step(&mut self, t: u64, c: &Constraint<T>) -> Result<Estimates<T>> {
        if t != self.next_t {
            return Err(Error::OutOfOrder {
                expected: self.next_t,
                got: t,
            });
        }
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: c.dim(),
            }
            .at_step(t, "rice"));
        }

        let schedule = active_intervals(t, self.cfg.i0, self.cfg.max_level);
        let mut last = self.last_estimate.clone();
        let mut learners: Vec<(DyadicInterval, ComidLearner<T>)> =
            Vec::with_capacity(schedule.len());

        for (iv, learner) in &self.active {
            if iv.end < t {
                last.insert(iv.level, learner.state().clone());
            }
        }
        for iv in schedule {
            if let Some(existing) = self.active.get(&iv) {
                learners.push((iv, existing.clone()));
                continue;
            }
            let init = if iv.level == 0 {
                match last.get(&0) {
                    Some(s) => s.clone(),
                    None => self.fresh_state()?,
                }
            } else if let Some(s) = last.get(&(iv.level - 1)) {
                s.clone()
            } else if let Some((_, parent)) = learners.iter().find(|(p, _)| p.level == iv.level - 1)
            {
                parent.state().clone()
            } else {
                self.fresh_state()?
            };
            let learner = ComidLearner::new(init, self.cfg.rate(&iv), self.cfg.loss)?;
            learners.push((iv, learner));
        }

        let update = |(_, learner): &mut (DyadicInterval, ComidLearner<T>)| learner.update(c);
        if self.dim >= PARALLEL_MIN_DIM {
            learners
                .par_iter_mut()
                .map(update)
                .collect::<Result<Vec<_>>>()
        } else {
            learners.iter_mut().map(update).collect::<Result<Vec<_>>>()
        }
        .map_err(|e| e.at_step(t, "rice"))?;

        let estimates = learners
            .iter()
            .map(|(iv, l)| (*iv, l.state().clone()))
            .collect();
        self.active = learners.into_iter().collect();
        self.last_estimate = last;
        self.next_t = t + 1;
        Ok(estimates)
    }
}

/// Functional form of [`RiceEnsemble::step`].
pub fn rice_step<T: Scalar>(
    mut ens: RiceEnsemble<T>,
    t: u64,
    c: &Constraint<T>,
) -> Result<(RiceEnsemble<T>, Estimates<T>)> {
    let out = ens.step(t, c)?;
    Ok((ens, out))
}
