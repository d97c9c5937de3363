//! Online tracking of a drifting Mahalanobis metric.
//!
//! The crate is organised bottom-up:
//!
//! * [`metric`] – metric parameterisation `(M, μ)`, margin hinge loss, subgradients, regularizers
//! * [`prox`] / [`comid`] – composite-objective mirror descent learner with closed-form proximal steps
//! * [`dyadic`] / [`rice`] – the dyadic interval ladder and the retro-initialized ensemble of learners
//! * [`ocelad`] – the strongly adaptive combiner driven by estimated regret
//! * [`tracker`] – the full per-step loop wiring the ensemble into the combiner
//! * [`sim`] – synthetic clustered data under rotation drift and partition switches
//! * [`eval`] – k-NN error, k-means, NMI, embeddings and dynamic regret
//! * [`experiment`] – configuration, trial runner, CSV artifacts, checkpoints
//!
//! The numerical core is generic over the scalar type ([`Scalar`], implemented for `f32` and
//! `f64`); the simulator, evaluators and experiment runner work in `f64`.

pub mod comid;
pub mod dyadic;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod metric;
pub mod ocelad;
pub mod prox;
pub mod rice;
pub mod sim;
pub mod tracker;

use nalgebra::RealField;

pub use comid::ComidLearner;
pub use dyadic::{active_intervals, DyadicInterval};
pub use error::{Error, Result};
pub use metric::{Constraint, Label, LossConfig, MetricState, Regularizer};
pub use ocelad::{ConvexCombine, EnsembleWeights, LearnerOutput};
pub use rice::{RiceConfig, RiceEnsemble};
pub use tracker::RiceOcelad;

/// Real scalar the numerical core is written against.
pub trait Scalar:
    RealField + Copy + num_traits::FromPrimitive + num_traits::ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite f64 constant")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn is_finite_val(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type MetricState64 = MetricState<f64>;
pub type MetricState32 = MetricState<f32>;
pub type Constraint64 = Constraint<f64>;
pub type Constraint32 = Constraint<f32>;
pub type ComidLearner64 = ComidLearner<f64>;
pub type ComidLearner32 = ComidLearner<f32>;
pub type RiceEnsemble64 = RiceEnsemble<f64>;
pub type RiceEnsemble32 = RiceEnsemble<f32>;
pub type EnsembleWeights64 = EnsembleWeights<f64>;
pub type EnsembleWeights32 = EnsembleWeights<f32>;
pub type RiceOcelad64 = RiceOcelad<f64>;
pub type RiceOcelad32 = RiceOcelad<f32>;
