//! Small dense symmetric-matrix helpers shared by the learners and evaluators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, Scalar};

/// Relative tolerance used when checking symmetry of inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance below zero accepted for eigenvalues of a PSD matrix.
pub const PSD_TOL: f64 = 1e-9;

pub fn frobenius<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

pub fn max_asymmetry<T: Scalar>(m: &DMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// `M ← (M + Mᵀ)/2` in place.
pub fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Rejects non-square matrices and matrices whose asymmetry exceeds `tol·max(1, ‖M‖_F)`.
///
/// `tol` is clamped from below by a few machine epsilons so that `f32` inputs which are
/// symmetric up to rounding are not refused.
pub fn check_symmetric<T: Scalar>(m: &DMatrix<T>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite_val()) {
        return Err(Error::NonFinite("matrix"));
    }
    let scale = frobenius(m).as_f64().max(1.0);
    let tol = tol.max(8.0 * T::default_epsilon().as_f64());
    let asym = max_asymmetry(m).as_f64();
    if asym > tol * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Full symmetric eigendecomposition, eigenvalues in ascending order.
pub fn sym_eigen<T: Scalar>(m: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), T::default_epsilon(), 1000 * n.max(1))
        .ok_or(Error::EigenFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite_val()) {
        return Err(Error::EigenFailure);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// `V·diag(λ)·Vᵀ`, symmetrized.
pub fn reconstruct<T: Scalar>(values: &DVector<T>, vectors: &DMatrix<T>) -> DMatrix<T> {
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lam);
    }
    let mut out = &scaled * vectors.transpose();
    symmetrize(&mut out);
    out
}

/// Applies `f` to each eigenvalue of the symmetric matrix `m`.
pub fn spectral_map<T: Scalar>(m: &DMatrix<T>, f: impl Fn(T) -> T) -> Result<DMatrix<T>> {
    let (mut values, vectors) = sym_eigen(m)?;
    values.apply(|v| *v = f(*v));
    Ok(reconstruct(&values, &vectors))
}

/// Euclidean projection onto the PSD cone (eigenvalue clamping).
pub fn project_psd<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    spectral_map(m, |v| if v > T::zero() { v } else { T::zero() })
}

pub fn min_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    let (values, _) = sym_eigen(m)?;
    Ok(if values.is_empty() {
        T::zero()
    } else {
        values[0]
    })
}

/// True when the smallest eigenvalue is at least `−PSD_TOL·max(1, ‖M‖_F)`.
pub fn is_psd<T: Scalar>(m: &DMatrix<T>) -> Result<bool> {
    let scale = frobenius(m).max(T::one());
    Ok(min_eigenvalue(m)? >= -T::lit(PSD_TOL) * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_ascending_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0]);
        let (values, vectors) = sym_eigen(&m).unwrap();
        assert!(values[0] <= values[1] && values[1] <= values[2]);
        let back = reconstruct(&values, &vectors);
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn projection_clamps_negative_part() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let p = project_psd(&m).unwrap();
        assert!((p - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).norm() < 1e-15);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            check_symmetric(&m, SYMMETRY_TOL),
            Err(Error::NotSymmetric(_))
        ));
    }
}
