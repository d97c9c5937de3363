//! Closed-form proximal operators restricted to the PSD cone.

use nalgebra::DMatrix;

use crate::linalg::{self, PSD_TOL};
use crate::{Error, Result, Scalar};

fn check_tau<T: Scalar>(tau: T) -> Result<()> {
    if !tau.is_finite_val() || tau < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "proximal threshold must be finite and >= 0, got {}",
            tau.as_f64()
        )));
    }
    Ok(())
}

/// `argmin_{M ⪰ 0} ½‖M − G‖²_F + τ‖M‖_*`.
///
/// On the PSD cone the nuclear norm is the trace, so the minimiser keeps the eigenvectors of
/// `G` and maps each eigenvalue `λ ↦ max(λ − τ, 0)`.
pub fn prox_nuclear_psd<T: Scalar>(g: &DMatrix<T>, tau: T) -> Result<DMatrix<T>> {
    linalg::check_symmetric(g, PSD_TOL)?;
    check_tau(tau)?;
    linalg::spectral_map(g, |lam| {
        let shrunk = lam - tau;
        if shrunk > T::zero() {
            shrunk
        } else {
            T::zero()
        }
    })
}

/// Entrywise soft-threshold at `τ` followed by projection onto the PSD cone.
///
/// This is exact whenever the thresholded matrix is already PSD; otherwise it is the
/// two-stage approximation of the joint proximal map of `τ‖vec M‖₁ + ι_{M ⪰ 0}`.
pub fn prox_l1_psd<T: Scalar>(g: &DMatrix<T>, tau: T) -> Result<DMatrix<T>> {
    linalg::check_symmetric(g, PSD_TOL)?;
    check_tau(tau)?;
    let thresholded = soft_threshold(g, tau);
    linalg::project_psd(&thresholded)
}

/// `sign(G_ij)·max(|G_ij| − τ, 0)`.
pub fn soft_threshold<T: Scalar>(g: &DMatrix<T>, tau: T) -> DMatrix<T> {
    g.map(|v| {
        let mag = v.abs() - tau;
        if mag > T::zero() {
            if v > T::zero() {
                mag
            } else {
                -mag
            }
        } else {
            T::zero()
        }
    })
}
