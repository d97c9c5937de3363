//! Strongly adaptive combination of a dyadic ensemble of black-box learners.
//!
//! Each step the combiner receives one estimate and one loss per active interval. The
//! estimates are averaged with the normalized weights; each learner's estimated regret
//!
//! ```text
//! r_t(I) = Σ_J w̄_t(J)·ℓ_t(θ_t(J)) − ℓ_t(θ_t(I))
//! ```
//!
//! drives a multiplicative update `w_{t+1}(I) = w_t(I)·(1 + η_I·r_t(I)/max_J |r_t(J)|)` with
//! `η_I = min(1/2, 1/√|I|)`. A newly active interval enters with weight `η_I`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::dyadic::DyadicInterval;
use crate::metric::MetricState;
use crate::{linalg, Error, Result, Scalar};

/// Parameters that can be averaged with convex coefficients.
pub trait ConvexCombine<T: Scalar>: Clone {
    /// `Σ cᵢ·θᵢ` for coefficients that are positive and sum to one. `parts` is never empty.
    fn convex_combination(parts: &[(T, &Self)]) -> Self;
}

impl<T: Scalar> ConvexCombine<T> for T {
    fn convex_combination(parts: &[(T, &Self)]) -> Self {
        parts.iter().fold(T::zero(), |acc, (c, v)| acc + *c * **v)
    }
}

impl<T: Scalar> ConvexCombine<T> for DVector<T> {
    fn convex_combination(parts: &[(T, &Self)]) -> Self {
        let mut out = DVector::zeros(parts[0].1.len());
        for (c, v) in parts {
            out.axpy(*c, v, T::one());
        }
        out
    }
}

impl<T: Scalar> ConvexCombine<T> for DMatrix<T> {
    fn convex_combination(parts: &[(T, &Self)]) -> Self {
        let (r, c) = parts[0].1.shape();
        let mut out = DMatrix::zeros(r, c);
        for (w, m) in parts {
            out += *m * *w;
        }
        out
    }
}

/// The PSD cone and `{μ ≥ 1}` are convex, so the average of valid states is valid.
impl<T: Scalar> ConvexCombine<T> for MetricState<T> {
    fn convex_combination(parts: &[(T, &Self)]) -> Self {
        let n = parts[0].1.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut mu = T::zero();
        for (w, s) in parts {
            m += s.matrix() * *w;
            mu += *w * s.mu();
        }
        linalg::symmetrize(&mut m);
        let mu = if mu < T::one() { T::one() } else { mu };
        MetricState::from_parts_unchecked(m, mu)
    }
}

/// One learner's contribution at step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerOutput<T: Scalar, P> {
    pub interval: DyadicInterval,
    pub estimate: P,
    /// `ℓ_t` evaluated at `estimate`.
    pub loss: T,
}

const RESCALE_LOW: f64 = 1e-30;
const RESCALE_HIGH: f64 = 1e30;

/// Positive weights for exactly the active intervals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleWeights<T: Scalar> {
    entries: BTreeMap<DyadicInterval, T>,
}

impl<T: Scalar> EnsembleWeights<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Builds weights from explicit entries; every weight must be finite and positive.
    pub fn from_entries(entries: BTreeMap<DyadicInterval, T>) -> Result<Self> {
        if entries
            .values()
            .any(|w| !w.is_finite_val() || *w <= T::zero())
        {
            return Err(Error::InvalidArgument(
                "weights must be finite and > 0".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &BTreeMap<DyadicInterval, T> {
        &self.entries
    }

    pub fn get(&self, interval: &DyadicInterval) -> Option<T> {
        self.entries.get(interval).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> T {
        self.entries.values().fold(T::zero(), |a, w| a + *w)
    }

    /// Weights divided by their sum.
    pub fn normalized(&self) -> BTreeMap<DyadicInterval, T> {
        let total = self.total();
        self.entries.iter().map(|(k, w)| (*k, *w / total)).collect()
    }

    /// Multiplies every weight by `factor`; the combination and the regrets are unchanged.
    pub fn rescaled(&self, factor: T) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, w)| (*k, *w * factor))
                .collect(),
        }
    }

    fn keep_in_range(&mut self) {
        let total = self.total().as_f64();
        if !(RESCALE_LOW..=RESCALE_HIGH).contains(&total) {
            let inv = T::one() / self.total();
            for w in self.entries.values_mut() {
                *w *= inv;
            }
        }
    }
}

/// `η_I = min(1/2, 1/√|I|)`.
pub fn interval_rate<T: Scalar>(interval: &DyadicInterval) -> T {
    let r = T::one() / T::lit(interval.len() as f64).sqrt();
    let half = T::lit(0.5);
    if r < half {
        r
    } else {
        half
    }
}

fn check_cover<T: Scalar, P>(
    weights: &EnsembleWeights<T>,
    outputs: &[LearnerOutput<T, P>],
) -> Result<()> {
    if outputs.is_empty() {
        return Err(Error::EmptyOutputs);
    }
    if outputs.len() != weights.len()
        || outputs
            .iter()
            .any(|o| !weights.entries.contains_key(&o.interval))
    {
        return Err(Error::WeightMismatch);
    }
    if outputs.iter().any(|o| !o.loss.is_finite_val()) {
        return Err(Error::NonFinite("learner loss"));
    }
    Ok(())
}

/// Convex coefficients `w(I)/Σw` in output order.
fn coefficients<T: Scalar, P>(
    weights: &EnsembleWeights<T>,
    outputs: &[LearnerOutput<T, P>],
) -> Vec<T> {
    let total = weights.total();
    outputs
        .iter()
        .map(|o| weights.entries[&o.interval] / total)
        .collect()
}

/// `Σ w(I)·θ(I) / Σ w(I)`.
pub fn combine<T: Scalar, P: ConvexCombine<T>>(
    weights: &EnsembleWeights<T>,
    outputs: &[LearnerOutput<T, P>],
) -> Result<P> {
    check_cover(weights, outputs)?;
    let coefs = coefficients(weights, outputs);
    let parts: Vec<(T, &P)> = coefs
        .into_iter()
        .zip(outputs.iter().map(|o| &o.estimate))
        .collect();
    Ok(P::convex_combination(&parts))
}

/// Weighted-average loss minus each learner's own loss.
pub fn estimated_regret<T: Scalar, P>(
    weights: &EnsembleWeights<T>,
    outputs: &[LearnerOutput<T, P>],
) -> Result<BTreeMap<DyadicInterval, T>> {
    check_cover(weights, outputs)?;
    let coefs = coefficients(weights, outputs);
    let losses: Vec<T> = outputs.iter().map(|o| o.loss).collect();
    let average = coefs
        .iter()
        .zip(&losses)
        .fold(T::zero(), |acc, (c, l)| acc + *c * *l);
    Ok(outputs
        .iter()
        .zip(&losses)
        .map(|(o, l)| (o.interval, average - *l))
        .collect())
}

/// Multiplicative update on estimated regrets rescaled into `[−1, 1]`.
///
/// When every regret is zero the weights are returned unchanged.
pub fn update_weights<T: Scalar>(
    weights: &EnsembleWeights<T>,
    regrets: &BTreeMap<DyadicInterval, T>,
) -> Result<EnsembleWeights<T>> {
    if regrets.values().any(|r| !r.is_finite_val()) {
        return Err(Error::NonFinite("estimated regret"));
    }
    if weights.entries.keys().any(|k| !regrets.contains_key(k)) {
        return Err(Error::WeightMismatch);
    }
    let scale = weights
        .entries
        .keys()
        .map(|k| regrets[k].abs())
        .fold(T::zero(), |a, r| if r > a { r } else { a });
    if scale == T::zero() {
        return Ok(weights.clone());
    }
    let mut next = EnsembleWeights {
        entries: weights
            .entries
            .iter()
            .map(|(k, w)| {
                let ratio = regrets[k] / scale;
                (*k, *w * (T::one() + interval_rate::<T>(k) * ratio))
            })
            .collect(),
    };
    next.keep_in_range();
    Ok(next)
}

/// Drops weights of intervals that are no longer active and enters new ones at `η_I`.
pub fn sync_active<T: Scalar>(
    weights: &EnsembleWeights<T>,
    active: &[DyadicInterval],
) -> EnsembleWeights<T> {
    let mut next = EnsembleWeights {
        entries: active
            .iter()
            .map(|iv| (*iv, weights.get(iv).unwrap_or_else(|| interval_rate(iv))))
            .collect(),
    };
    next.keep_in_range();
    next
}

/// One combiner step: combine, estimate regrets, update weights, then align them with the
/// intervals active at the next step. Returns the estimate for this step and the next weights.
pub fn ocelad_step<T: Scalar, P: ConvexCombine<T>>(
    weights: &EnsembleWeights<T>,
    outputs: &[LearnerOutput<T, P>],
    active_next: &[DyadicInterval],
) -> Result<(P, EnsembleWeights<T>)> {
    let estimate = combine(weights, outputs)?;
    let regrets = estimated_regret(weights, outputs)?;
    let updated = update_weights(weights, &regrets)?;
    Ok((estimate, sync_active(&updated, active_next)))
}
