use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicInterval;
use crate::{Error, Result};

/// Per-step losses of the algorithm and of a comparator sequence, plus the comparator's
/// step-to-step movement `‖θ_{t+1} − θ_t‖` (recorded at `t`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub algorithm: Vec<f64>,
    pub comparator: Vec<f64>,
    pub path: Vec<f64>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.algorithm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.algorithm.is_empty()
    }

    pub fn push(&mut self, algorithm: f64, comparator: f64, path: f64) -> Result<()> {
        if !(algorithm.is_finite() && comparator.is_finite() && path.is_finite()) {
            return Err(Error::NonFinite("regret ledger entry"));
        }
        self.algorithm.push(algorithm);
        self.comparator.push(comparator);
        self.path.push(path);
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.comparator.len() != self.algorithm.len() || self.path.len() != self.algorithm.len()
        {
            return Err(Error::InvalidArgument(
                "ledger columns have different lengths".into(),
            ));
        }
        Ok(())
    }
}

/// Interval sums over steps `q..=s` (1-based): `Σ f_t(θ̂_t) − Σ f_t(θ_t)` and `Σ ‖θ_{t+1} − θ_t‖`.
pub fn dynamic_regret(ledger: &RegretLedger, q: u64, s: u64) -> Result<(f64, f64)> {
    ledger.check()?;
    if q == 0 || q > s || s as usize > ledger.len() {
        return Err(Error::InvalidArgument(format!(
            "interval [{q}, {s}] is not inside [1, {}]",
            ledger.len()
        )));
    }
    let range = (q as usize - 1)..(s as usize);
    let alg: f64 = ledger.algorithm[range.clone()].iter().sum();
    let comp: f64 = ledger.comparator[range.clone()].iter().sum();
    let path: f64 = ledger.path[range].iter().sum();
    Ok((alg - comp, path))
}

/// Regret and path length on every dyadic interval lying entirely inside the ledger.
pub fn dyadic_sweep(ledger: &RegretLedger, i0: u64) -> Result<Vec<(DyadicInterval, f64, f64)>> {
    ledger.check()?;
    let horizon = ledger.len() as u64;
    let mut out = Vec::new();
    let mut level = 0u32;
    while i0.checked_shl(level).is_some_and(|len| len <= horizon) && level < 62 {
        let mut t = 1;
        while t <= horizon {
            if let Some(iv) = DyadicInterval::containing(t, i0, level) {
                if iv.end > horizon {
                    break;
                }
                let (r, p) = dynamic_regret(ledger, iv.start, iv.end)?;
                out.push((iv, r, p));
                t = iv.end + 1;
            } else {
                t += i0;
            }
        }
        level += 1;
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two matching points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument(
            "log-log fit needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(alg: &[f64], comp: &[f64], path: &[f64]) -> RegretLedger {
        RegretLedger {
            algorithm: alg.to_vec(),
            comparator: comp.to_vec(),
            path: path.to_vec(),
        }
    }

    #[test]
    fn direct_sum_example() {
        let l = ledger(&[2.0, 2.0, 2.0], &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!(dynamic_regret(&l, 1, 3).unwrap(), (3.0, 0.0));
    }

    #[test]
    fn own_sequence_has_zero_regret() {
        let losses = [0.3, 1.2, 0.0, 4.0];
        let l = ledger(&losses, &losses, &[0.1, 0.2, 0.0, 0.0]);
        let (r, p) = dynamic_regret(&l, 1, 4).unwrap();
        assert_eq!(r, 0.0);
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bad_intervals_rejected() {
        let l = ledger(&[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(dynamic_regret(&l, 0, 1).is_err());
        assert!(dynamic_regret(&l, 2, 1).is_err());
        assert!(dynamic_regret(&l, 1, 3).is_err());
    }

    #[test]
    fn sweep_covers_dyadic_grid() {
        let l = ledger(&[1.0; 8], &[0.0; 8], &[0.0; 8]);
        let sweep = dyadic_sweep(&l, 1).unwrap();
        // level 0: 8 intervals, level 1: [2,3],[4,5],[6,7], level 2: [4,7]
        assert_eq!(sweep.len(), 12);
        assert!(sweep.iter().all(|(iv, r, _)| *r == iv.len() as f64));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 0.5).abs() < 1e-12);
    }
}
