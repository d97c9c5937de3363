use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Random skew-symmetric generator with unit Frobenius norm (zero when `n < 2`).
pub fn random_skew<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let g: f64 = rng.sample(StandardNormal);
            k[(i, j)] = g;
            k[(j, i)] = -g;
        }
    }
    let norm = k.norm();
    if norm > 0.0 {
        k /= norm;
    }
    k
}

/// `exp(ε·K)` for skew-symmetric `K`; orthogonal up to rounding.
pub fn rotation_from_generator(k: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    (k * epsilon).exp()
}

/// Rotates every row `x ↦ Gx` by a fresh random `G = exp(ε·K)`, `‖K‖_F = 1`.
///
/// With `ε = 0` no randomness is consumed and `G = I`.
pub fn rotation_step<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    epsilon: f64,
    rng: &mut R,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = points.ncols();
    if epsilon == 0.0 {
        return (points.clone(), DMatrix::identity(n, n));
    }
    let g = rotation_from_generator(&random_skew(n, rng), epsilon);
    (points * g.transpose(), g)
}
