//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the crate's linear algebra: eigen-decompositions use a cyclic
//! Jacobi sweep and the proximal/COMID minimisers are plain iterative methods.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ocelad::{Constraint, Label, MetricState};
use rand::Rng;
use rand_distr::StandardNormal;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix: `(values, vectors)` with
/// `a = V·diag(values)·Vᵀ`.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

pub fn from_eigen(values: &[f64], vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_row_slice(values));
    vectors * d * vectors.transpose()
}

/// Frobenius-nearest PSD matrix via the Jacobi oracle.
pub fn psd_projection(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let (values, vectors) = jacobi_eigen(&sym);
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    from_eigen(&clipped, &vectors)
}

pub fn min_eigen(a: &DMatrix<f64>) -> f64 {
    jacobi_eigen(a).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// `argmin_{M ⪰ 0} ½‖M − G‖²_F + τ·tr(M)` by projected gradient (on the PSD cone the nuclear
/// norm equals the trace, so the objective is smooth there).
pub fn nuclear_prox_by_projected_gradient(g: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let n = g.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut m = psd_projection(g);
    for _ in 0..200 {
        let grad = &m - g + &eye * tau;
        m = psd_projection(&(&m - grad * 0.5));
    }
    m
}

/// Minimises the linearised COMID objective
/// `η·⟨(G_M, g_μ), (M, μ)⟩ + ½‖M − M_t‖² + ½(μ − μ_t)² + η·ρ·tr(M)` over `M ⪰ 0`, `μ ≥ 1`
/// by projected gradient, with the hinge subgradient computed from scratch.
pub fn comid_by_projected_gradient(
    state: &MetricState<f64>,
    c: &Constraint<f64>,
    eta: f64,
    rho: f64,
) -> (DMatrix<f64>, f64) {
    let n = state.dim();
    let u = c.u();
    let y = c.y().sign::<f64>();
    let mt = state.matrix().clone();
    let mut_ = state.mu();
    let margin = y * (mut_ - (u.transpose() * &mt * &u)[(0, 0)]);
    let (gm, gmu) = if margin < 1.0 {
        (&u * u.transpose() * y, -y)
    } else {
        (DMatrix::zeros(n, n), 0.0)
    };
    let eye = DMatrix::<f64>::identity(n, n);
    let mut m = mt.clone();
    let mut mu = mut_;
    for _ in 0..200 {
        let grad = &gm * eta + (&m - &mt) + &eye * (eta * rho);
        m = psd_projection(&(&m - grad * 0.5));
        let gmu_total = eta * gmu + (mu - mut_);
        mu = (mu - 0.5 * gmu_total).max(1.0);
    }
    (m, mu)
}

/// Hinge loss recomputed from the raw pair.
pub fn hinge(m: &DMatrix<f64>, mu: f64, c: &Constraint<f64>) -> f64 {
    let u = c.x() - c.z();
    let d = (u.transpose() * m * &u)[(0, 0)];
    (1.0 - c.y().sign::<f64>() * (mu - d)).max(0.0)
}

/// Central finite difference of the hinge along `(dm, dmu)`.
pub fn hinge_directional_fd(
    m: &DMatrix<f64>,
    mu: f64,
    c: &Constraint<f64>,
    dm: &DMatrix<f64>,
    dmu: f64,
    h: f64,
) -> f64 {
    let plus = hinge(&(m + dm * h), mu + dmu * h, c);
    let minus = hinge(&(m - dm * h), mu - dmu * h, c);
    (plus - minus) / (2.0 * h)
}

pub fn random_symmetric<R: Rng>(n: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

pub fn random_psd<R: Rng>(n: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let m = &a * a.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_vector<R: Rng>(n: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> MetricState<f64> {
    let m = random_psd(n, 0.7, rng);
    let mu = 1.0 + 3.0 * rng.random::<f64>();
    MetricState::new(m, mu).expect("random PSD state")
}

pub fn random_constraint<R: Rng>(t: u64, n: usize, rng: &mut R) -> Constraint<f64> {
    let y = if rng.random::<bool>() {
        Label::Similar
    } else {
        Label::Dissimilar
    };
    Constraint::new(t, random_vector(n, 1.0, rng), random_vector(n, 1.0, rng), y)
        .expect("well-formed constraint")
}
