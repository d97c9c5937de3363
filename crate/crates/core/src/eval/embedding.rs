use nalgebra::DMatrix;

use crate::linalg;
use crate::{Error, Result};

/// Linear map `L` (`d × n`) with `LᵀL` the rank-`d` truncation of `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMap {
    pub l: DMatrix<f64>,
}

impl EmbeddingMap {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Embeds each row of `points` (`n_pts × n` → `n_pts × d`).
    pub fn embed(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.ncols() != self.l.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.l.ncols(),
                got: points.ncols(),
            });
        }
        Ok(points * self.l.transpose())
    }
}

/// `L = Λ_d^{1/2}·V_dᵀ` from the top-`d` eigenpairs of `M`; negative eigenvalues count as 0.
pub fn embedding_from_metric(m: &DMatrix<f64>, d: usize) -> Result<EmbeddingMap> {
    let n = m.nrows();
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension must be in 1..={n}, got {d}"
        )));
    }
    linalg::check_symmetric(m, linalg::PSD_TOL)?;
    let (values, vectors) = linalg::sym_eigen(m)?;
    let mut l = DMatrix::zeros(d, n);
    for row in 0..d {
        let idx = n - 1 - row;
        let scale = values[idx].max(0.0).sqrt();
        for col in 0..n {
            l[(row, col)] = scale * vectors[(col, idx)];
        }
    }
    Ok(EmbeddingMap { l })
}
