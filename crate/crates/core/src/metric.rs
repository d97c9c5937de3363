//! Metric parameterisation, margin constraints and the composite per-step loss.
//!
//! A metric is the pair `θ = (M, μ)` with `M ⪰ 0` and threshold `μ ≥ 1`. A constraint
//! `(x, z, y)` asks for `d²_M(x, z) ≤ μ − 1` when the points are similar (`y = +1`) and
//! `d²_M(x, z) ≥ μ + 1` when they are dissimilar (`y = −1`). Violations are penalised by a
//! margin loss `ℓ(y·(μ − uᵀMu))` with `u = x − z`; the default loss is the hinge.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, PSD_TOL, SYMMETRY_TOL};
use crate::{Error, Result, Scalar};

/// The learned parameter `(M, μ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricState<T: Scalar> {
    m: DMatrix<T>,
    mu: T,
}

impl<T: Scalar> MetricState<T> {
    /// Validates symmetry, positive semidefiniteness, finiteness and `μ ≥ 1`.
    pub fn new(m: DMatrix<T>, mu: T) -> Result<Self> {
        linalg::check_symmetric(&m, SYMMETRY_TOL)?;
        if !mu.is_finite_val() {
            return Err(Error::NonFinite("mu"));
        }
        if mu < T::one() {
            return Err(Error::InvalidArgument(format!(
                "margin threshold must be >= 1, got {}",
                mu.as_f64()
            )));
        }
        if !linalg::is_psd(&m)? {
            return Err(Error::InvalidArgument(
                "metric matrix is not positive semidefinite".into(),
            ));
        }
        Ok(Self { m, mu })
    }

    /// `(I_n, μ₀)`.
    pub fn identity(n: usize, mu0: T) -> Result<Self> {
        Self::new(DMatrix::identity(n, n), mu0)
    }

    /// Skips validation; callers guarantee the invariants (outputs of proximal steps and
    /// convex combinations of valid states).
    pub(crate) fn from_parts_unchecked(m: DMatrix<T>, mu: T) -> Self {
        Self { m, mu }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn into_parts(self) -> (DMatrix<T>, T) {
        (self.m, self.mu)
    }

    /// `√(‖M − M'‖²_F + (μ − μ')²)`, the parameter distance used for path lengths.
    pub fn distance(&self, other: &Self) -> T {
        let dm = linalg::frobenius(&(&self.m - &other.m));
        let dmu = self.mu - other.mu;
        (dm * dm + dmu * dmu).sqrt()
    }

    /// Checks every invariant again; used by property tests and after deserialisation.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.m.clone(), self.mu).map(|_| ())
    }
}

/// Pair label: similar (`+1`) or dissimilar (`−1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Similar,
    Dissimilar,
}

impl Label {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Label::Similar => T::one(),
            Label::Dissimilar => -T::one(),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Similar => 1,
            Label::Dissimilar => -1,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.as_i8()
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Label::Similar),
            -1 => Ok(Label::Dissimilar),
            other => Err(Error::InvalidArgument(format!(
                "label must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// A timestamped pairwise constraint `(x, z, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T: Scalar> {
    t: u64,
    x: DVector<T>,
    z: DVector<T>,
    y: Label,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(t: u64, x: DVector<T>, z: DVector<T>, y: Label) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidArgument(
                "constraint step index starts at 1".into(),
            ));
        }
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: z.len(),
            });
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite_val()) {
            return Err(Error::NonFinite("constraint point"));
        }
        Ok(Self { t, x, z, y })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn x(&self) -> &DVector<T> {
        &self.x
    }

    pub fn z(&self) -> &DVector<T> {
        &self.z
    }

    pub fn y(&self) -> Label {
        self.y
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Difference vector `u = x − z`.
    pub fn u(&self) -> DVector<T> {
        &self.x - &self.z
    }

    /// Same pair at a different step index.
    pub fn with_t(mut self, t: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidArgument(
                "constraint step index starts at 1".into(),
            ));
        }
        self.t = t;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    NuclearNorm,
    ElementwiseL1,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig<T: Scalar> {
    rho: T,
    regularizer: Regularizer,
}

impl<T: Scalar> LossConfig<T> {
    pub fn new(rho: T, regularizer: Regularizer) -> Result<Self> {
        if !rho.is_finite_val() || rho < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "regularization weight must be finite and >= 0, got {}",
                rho.as_f64()
            )));
        }
        Ok(Self { rho, regularizer })
    }

    /// `ρ = 0`; the regularizer choice is irrelevant.
    pub fn unregularized() -> Self {
        Self {
            rho: T::zero(),
            regularizer: Regularizer::NuclearNorm,
        }
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }
}

/// A convex scalar loss applied to the signed margin `y·(μ − uᵀMu)`.
pub trait MarginLoss<T: Scalar> {
    fn value(&self, margin: T) -> T;
    /// A subgradient at `margin`.
    fn derivative(&self, margin: T) -> T;
}

/// `ℓ(z) = max(0, 1 − z)`, with subgradient 0 at the kink.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Hinge;

impl<T: Scalar> MarginLoss<T> for Hinge {
    fn value(&self, margin: T) -> T {
        let v = T::one() - margin;
        if v > T::zero() {
            v
        } else {
            T::zero()
        }
    }

    fn derivative(&self, margin: T) -> T {
        if T::one() - margin > T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    }
}

fn check_dim<T: Scalar>(state: &MetricState<T>, n: usize) -> Result<()> {
    if state.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: n,
        });
    }
    Ok(())
}

fn quad_form<T: Scalar>(m: &DMatrix<T>, u: &DVector<T>) -> T {
    let v = u.dot(&(m * u));
    if v < T::zero() {
        T::zero()
    } else {
        v
    }
}

/// `(x − z)ᵀ M (x − z)`, clamped at zero.
pub fn mahalanobis_sq<T: Scalar>(
    state: &MetricState<T>,
    x: &DVector<T>,
    z: &DVector<T>,
) -> Result<T> {
    check_dim(state, x.len())?;
    check_dim(state, z.len())?;
    if x.iter().chain(z.iter()).any(|v| !v.is_finite_val()) {
        return Err(Error::NonFinite("point"));
    }
    Ok(quad_form(&state.m, &(x - z)))
}

/// Signed margin `y·(μ − uᵀMu)` together with `u`.
fn signed_margin<T: Scalar>(state: &MetricState<T>, c: &Constraint<T>) -> Result<(T, DVector<T>)> {
    check_dim(state, c.dim())?;
    let u = c.u();
    let d2 = quad_form(&state.m, &u);
    Ok((c.y.sign::<T>() * (state.mu - d2), u))
}

pub fn margin_loss<T: Scalar, L: MarginLoss<T>>(
    loss: &L,
    state: &MetricState<T>,
    c: &Constraint<T>,
) -> Result<T> {
    let (margin, _) = signed_margin(state, c)?;
    Ok(loss.value(margin))
}

/// Subgradient `(∇_M ℓ, ∇_μ ℓ)` of `ℓ(y(μ − uᵀMu))`.
pub fn margin_subgradient<T: Scalar, L: MarginLoss<T>>(
    loss: &L,
    state: &MetricState<T>,
    c: &Constraint<T>,
) -> Result<(DMatrix<T>, T)> {
    let (margin, u) = signed_margin(state, c)?;
    let n = u.len();
    let slope = loss.derivative(margin);
    if slope == T::zero() {
        return Ok((DMatrix::zeros(n, n), T::zero()));
    }
    let y = c.y.sign::<T>();
    // dz/dM = −y·uuᵀ, dz/dμ = y
    let grad_m = &u * u.transpose() * (-y * slope);
    Ok((grad_m, y * slope))
}

/// `max(0, 1 − y·(μ − uᵀMu))`.
pub fn hinge_loss<T: Scalar>(state: &MetricState<T>, c: &Constraint<T>) -> Result<T> {
    margin_loss(&Hinge, state, c)
}

/// Hinge subgradient: `(y·uuᵀ, −y)` when active, zero otherwise (including the kink).
pub fn loss_subgradient<T: Scalar>(
    state: &MetricState<T>,
    c: &Constraint<T>,
) -> Result<(DMatrix<T>, T)> {
    margin_subgradient(&Hinge, state, c)
}

/// `r(M)`: nuclear norm (sum of |eigenvalues| of the symmetric input) or elementwise L1 norm.
pub fn regularizer_value<T: Scalar>(m: &DMatrix<T>, cfg: &LossConfig<T>) -> Result<T> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    match cfg.regularizer {
        Regularizer::NuclearNorm => {
            linalg::check_symmetric(m, PSD_TOL)?;
            let (values, _) = linalg::sym_eigen(m)?;
            Ok(values.iter().fold(T::zero(), |acc, v| acc + v.abs()))
        }
        Regularizer::ElementwiseL1 => Ok(m.iter().fold(T::zero(), |acc, v| acc + v.abs())),
    }
}

/// Per-step composite objective `f_t(θ) = ℓ_t(θ) + ρ·r(M)`.
pub fn composite_loss<T: Scalar>(
    state: &MetricState<T>,
    c: &Constraint<T>,
    cfg: &LossConfig<T>,
) -> Result<T> {
    let hinge = hinge_loss(state, c)?;
    if cfg.rho == T::zero() {
        return Ok(hinge);
    }
    Ok(hinge + cfg.rho * regularizer_value(&state.m, cfg)?)
}
