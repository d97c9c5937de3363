//! Best fixed metric in hindsight for a logged constraint stream.
//!
//! Minimises `Σ_t ℓ_t(M, μ) + T·ρ·r(M)` over `M ⪰ 0`, `μ ≥ 1` with accelerated projected
//! gradient on a Huber-smoothed hinge, tightening the smoothing in stages. The result is an
//! upper bound on the true minimum; the reported objective is always the exact (unsmoothed)
//! value at the returned point.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::metric::{Constraint, LossConfig, MetricState, Regularizer};
use crate::prox::prox_l1_psd;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOptions {
    /// Smoothing widths, from coarse to fine.
    pub smoothing: Vec<f64>,
    pub iterations_per_stage: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            smoothing: vec![0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3],
            iterations_per_stage: 150,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchFit {
    pub state: MetricState<f64>,
    /// Exact `Σ_t f_t` at `state`.
    pub objective: f64,
}

/// Precomputed stream: difference vectors as rows of `u`, labels as ±1.
struct Stream {
    u: DMatrix<f64>,
    y: DVector<f64>,
}

impl Stream {
    fn new(constraints: &[Constraint<f64>]) -> Result<Self> {
        let n = constraints
            .first()
            .map(|c| c.dim())
            .ok_or_else(|| Error::InvalidArgument("empty constraint stream".into()))?;
        let mut u = DMatrix::zeros(constraints.len(), n);
        let mut y = DVector::zeros(constraints.len());
        for (i, c) in constraints.iter().enumerate() {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.dim(),
                });
            }
            u.set_row(i, &c.u().transpose());
            y[i] = c.y().sign::<f64>();
        }
        Ok(Self { u, y })
    }

    /// Signed margins `y_t(μ − u_tᵀMu_t)`.
    fn margins(&self, m: &DMatrix<f64>, mu: f64) -> DVector<f64> {
        let um = &self.u * m;
        DVector::from_iterator(
            self.u.nrows(),
            (0..self.u.nrows()).map(|t| {
                let d2 = um.row(t).dot(&self.u.row(t)).max(0.0);
                self.y[t] * (mu - d2)
            }),
        )
    }
}

fn regularizer(m: &DMatrix<f64>, cfg: &LossConfig<f64>) -> f64 {
    match cfg.regularizer() {
        // on the PSD cone the nuclear norm is the trace
        Regularizer::NuclearNorm => m.trace(),
        Regularizer::ElementwiseL1 => m.iter().map(|v| v.abs()).sum(),
    }
}

fn exact_objective(stream: &Stream, m: &DMatrix<f64>, mu: f64, cfg: &LossConfig<f64>) -> f64 {
    let hinge: f64 = stream
        .margins(m, mu)
        .iter()
        .map(|z| (1.0 - z).max(0.0))
        .sum();
    hinge + stream.u.nrows() as f64 * cfg.rho() * regularizer(m, cfg)
}

/// Smooth part (mean over the stream) and its gradient.
fn smooth_part(
    stream: &Stream,
    m: &DMatrix<f64>,
    mu: f64,
    delta: f64,
    cfg: &LossConfig<f64>,
) -> (f64, DMatrix<f64>, f64) {
    let t_len = stream.u.nrows() as f64;
    let margins = stream.margins(m, mu);
    let mut value = 0.0;
    // weights c_t = −y_t·h'(z_t) for the M-gradient Σ c_t u_t u_tᵀ
    let mut coef = DVector::zeros(margins.len());
    let mut grad_mu = 0.0;
    for (t, &z) in margins.iter().enumerate() {
        let slack = 1.0 - z;
        let (h, dh) = if slack <= 0.0 {
            (0.0, 0.0)
        } else if slack < delta {
            (slack * slack / (2.0 * delta), -slack / delta)
        } else {
            (slack - delta / 2.0, -1.0)
        };
        value += h;
        coef[t] = -stream.y[t] * dh;
        grad_mu += dh * stream.y[t];
    }
    let mut scaled = stream.u.clone();
    for (t, c) in coef.iter().enumerate() {
        scaled.row_mut(t).scale_mut(*c);
    }
    let mut grad_m = stream.u.transpose() * scaled / t_len;
    if cfg.regularizer() == Regularizer::NuclearNorm && cfg.rho() > 0.0 {
        value += t_len * cfg.rho() * m.trace();
        for i in 0..m.nrows() {
            grad_m[(i, i)] += cfg.rho();
        }
    }
    (value / t_len, grad_m, grad_mu / t_len)
}

fn project(
    m: &DMatrix<f64>,
    mu: f64,
    step: f64,
    cfg: &LossConfig<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let mut m = m.clone();
    linalg::symmetrize(&mut m);
    let m = if cfg.regularizer() == Regularizer::ElementwiseL1 && cfg.rho() > 0.0 {
        prox_l1_psd(&m, step * cfg.rho())?
    } else {
        linalg::project_psd(&m)?
    };
    Ok((m, mu.max(1.0)))
}

/// Best fixed `(M, μ)` for `constraints`, started from `init` (identity with `μ = 2` if absent).
pub fn best_fixed_metric(
    constraints: &[Constraint<f64>],
    cfg: &LossConfig<f64>,
    init: Option<&MetricState<f64>>,
    opts: &BatchOptions,
) -> Result<BatchFit> {
    let stream = Stream::new(constraints)?;
    let n = stream.u.ncols();
    let start = match init {
        Some(s) if s.dim() == n => s.clone(),
        Some(s) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.dim(),
            })
        }
        None => MetricState::identity(n, 2.0)?,
    };
    let (mut m, mut mu) = (start.matrix().clone(), start.mu());
    let mut best = (exact_objective(&stream, &m, mu, cfg), m.clone(), mu);

    // mean-scale Lipschitz guess: max ‖u‖⁴ over the stream
    let max_u2 = (0..stream.u.nrows())
        .map(|t| stream.u.row(t).norm_squared())
        .fold(0.0f64, f64::max);
    for &delta in &opts.smoothing {
        let mut lip = ((max_u2 * max_u2 + 1.0) / delta).min(1e12) * 1e-2;
        let (mut ym, mut ymu) = (m.clone(), mu);
        let mut momentum = 1.0f64;
        let mut prev_value = f64::INFINITY;
        for _ in 0..opts.iterations_per_stage {
            let (fy, gm, gmu) = smooth_part(&stream, &ym, ymu, delta, cfg);
            // backtracking on the quadratic upper model
            let (next_m, next_mu, fx) = loop {
                let step = 1.0 / lip;
                let (cm, cmu) = project(&(&ym - &gm * step), ymu - step * gmu, step, cfg)?;
                let (fx, _, _) = smooth_part(&stream, &cm, cmu, delta, cfg);
                let dm = &cm - &ym;
                let dmu = cmu - ymu;
                let model =
                    fy + gm.dot(&dm) + gmu * dmu + 0.5 * lip * (dm.norm_squared() + dmu * dmu);
                if fx <= model + 1e-12 * fy.abs().max(1.0) || lip > 1e15 {
                    break (cm, cmu, fx);
                }
                lip *= 2.0;
            };
            let restart = fx > prev_value;
            let next_momentum = if restart {
                1.0
            } else {
                (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0
            };
            let beta = if restart {
                0.0
            } else {
                (momentum - 1.0) / next_momentum
            };
            ym = &next_m + (&next_m - &m) * beta;
            ymu = next_mu + (next_mu - mu) * beta;
            m = next_m;
            mu = next_mu;
            momentum = next_momentum;
            prev_value = fx;
            lip *= 0.9;
        }
        let exact = exact_objective(&stream, &m, mu, cfg);
        if exact < best.0 {
            best = (exact, m.clone(), mu);
        }
    }
    let (objective, m, mu) = best;
    let mut m = m;
    linalg::symmetrize(&mut m);
    Ok(BatchFit {
        state: MetricState::new(m, mu)?,
        objective,
    })
}
