//! A single composite-objective mirror descent (COMID) learner.
//!
//! With the squared-Frobenius Bregman divergence the update for constraint `c` is
//!
//! ```text
//! G  = M − η·∇_M ℓ
//! M⁺ = prox_{ηρ·r}(G) over M ⪰ 0
//! μ⁺ = max(1, μ − η·∇_μ ℓ)
//! ```

use crate::metric::{loss_subgradient, Constraint, LossConfig, MetricState, Regularizer};
use crate::prox::{prox_l1_psd, prox_nuclear_psd};
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct ComidLearner<T: Scalar> {
    state: MetricState<T>,
    eta: T,
    cfg: LossConfig<T>,
}

impl<T: Scalar> ComidLearner<T> {
    pub fn new(state: MetricState<T>, eta: T, cfg: LossConfig<T>) -> Result<Self> {
        if !eta.is_finite_val() || eta <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and > 0, got {}",
                eta.as_f64()
            )));
        }
        Ok(Self { state, eta, cfg })
    }

    /// Standalone learner started at `(I_n, μ₀)`.
    pub fn identity_start(n: usize, mu0: T, eta: T, cfg: LossConfig<T>) -> Result<Self> {
        Self::new(MetricState::identity(n, mu0)?, eta, cfg)
    }

    pub fn state(&self) -> &MetricState<T> {
        &self.state
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn loss_config(&self) -> &LossConfig<T> {
        &self.cfg
    }

    pub fn into_state(self) -> MetricState<T> {
        self.state
    }

    /// Applies one update in place. On error the learner is left untouched.
    pub fn update(&mut self, c: &Constraint<T>) -> Result<()> {
        let next = self.next_state(c).map_err(|e| e.at_step(c.t(), "comid"))?;
        if let Some(next) = next {
            self.state = next;
        }
        Ok(())
    }

    /// Consuming form of [`ComidLearner::update`].
    pub fn step(mut self, c: &Constraint<T>) -> Result<Self> {
        self.update(c)?;
        Ok(self)
    }

    /// `None` when the update is the identity (zero subgradient and no regularization).
    fn next_state(&self, c: &Constraint<T>) -> Result<Option<MetricState<T>>> {
        let (grad_m, grad_mu) = loss_subgradient(&self.state, c)?;
        if grad_m.iter().any(|v| !v.is_finite_val()) || !grad_mu.is_finite_val() {
            return Err(Error::NonFinite("loss subgradient"));
        }
        let inactive = grad_mu == T::zero() && grad_m.iter().all(|v| *v == T::zero());
        let rho = self.cfg.rho();
        if inactive && rho == T::zero() {
            return Ok(None);
        }

        let g = self.state.matrix() - grad_m * self.eta;
        let tau = self.eta * rho;
        let m = match self.cfg.regularizer() {
            Regularizer::NuclearNorm => prox_nuclear_psd(&g, tau)?,
            Regularizer::ElementwiseL1 => prox_l1_psd(&g, tau)?,
        };
        if m.iter().any(|v| !v.is_finite_val()) {
            return Err(Error::NonFinite("metric update"));
        }

        let mu = self.state.mu() - self.eta * grad_mu;
        let mu = if mu > T::one() { mu } else { T::one() };
        Ok(Some(MetricState::from_parts_unchecked(m, mu)))
    }
}

/// One COMID step on constraint `c`.
pub fn comid_step<T: Scalar>(
    learner: ComidLearner<T>,
    c: &Constraint<T>,
) -> Result<ComidLearner<T>> {
    learner.step(c)
}
