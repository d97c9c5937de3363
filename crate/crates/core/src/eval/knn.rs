use nalgebra::DMatrix;

use super::embedding::embedding_from_metric;
use crate::{Error, Result};

/// Leave-one-out k-NN error rate with Euclidean distances between the rows of `points`.
///
/// Neighbours at equal distance are taken in point-index order; a tied vote goes to the
/// smallest label.
pub fn knn_error(points: &DMatrix<f64>, labels: &[usize], k: usize) -> Result<f64> {
    let n_pts = points.nrows();
    if labels.len() != n_pts {
        return Err(Error::DimensionMismatch {
            expected: n_pts,
            got: labels.len(),
        });
    }
    if k == 0 || k >= n_pts {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < n_pts ({n_pts}), got {k}"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("points"));
    }
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    // row-major copy for cache-friendly distance loops
    let dim = points.ncols();
    let rows: Vec<f64> = (0..n_pts)
        .flat_map(|i| points.row(i).iter().copied().collect::<Vec<_>>())
        .collect();

    let mut errors = 0usize;
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n_pts - 1);
    let mut votes = vec![0usize; n_labels];
    for i in 0..n_pts {
        cand.clear();
        let xi = &rows[i * dim..(i + 1) * dim];
        for j in 0..n_pts {
            if j == i {
                continue;
            }
            let xj = &rows[j * dim..(j + 1) * dim];
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            cand.push((d2, j));
        }
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, by_dist);
        votes.iter_mut().for_each(|v| *v = 0);
        for &(_, j) in &cand[..k] {
            votes[labels[j]] += 1;
        }
        let mut best = 0;
        for (l, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = l;
            }
        }
        if best != labels[i] {
            errors += 1;
        }
    }
    Ok(errors as f64 / n_pts as f64)
}

/// k-NN error under the Mahalanobis metric `M`, via its full-rank factorisation.
pub fn knn_error_with_metric(
    m: &DMatrix<f64>,
    points: &DMatrix<f64>,
    labels: &[usize],
    k: usize,
) -> Result<f64> {
    let embedding = embedding_from_metric(m, m.nrows())?;
    knn_error(&embedding.embed(points)?, labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_blobs_have_zero_error() {
        let pts = DMatrix::from_row_slice(6, 1, &[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        assert_eq!(knn_error(&pts, &[0, 0, 0, 1, 1, 1], 1).unwrap(), 0.0);
        assert_eq!(knn_error(&pts, &[0, 0, 0, 1, 1, 1], 2).unwrap(), 0.0);
    }

    #[test]
    fn ties_resolve_deterministically() {
        // point 1 sits between 0 and 2 at equal distance; with k = 2 the vote is 1–1
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        // point 0 neighbours {1, 2}: labels {1, 0} → tie → label 0 (correct)
        // point 1 neighbours {0, 2}: labels {0, 0} → 0 (wrong, its label is 1)
        // point 2 neighbours {1, 0}: labels {1, 0} → tie → 0 (correct)
        assert!((knn_error(&pts, &[0, 1, 0], 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(knn_error(&pts, &[0, 1, 0], 0).is_err());
        assert!(knn_error(&pts, &[0, 1, 0], 3).is_err());
        assert!(knn_error(&pts, &[0, 1], 1).is_err());
    }

    #[test]
    fn metric_weighting_changes_neighbours() {
        // coordinate 0 carries the labels, coordinate 1 is a large nuisance
        let pts = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 5.0, 1.0, 0.1, 1.1, 5.1]);
        let labels = [0, 0, 1, 1];
        let eye = DMatrix::identity(2, 2);
        let focus = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(knn_error_with_metric(&eye, &pts, &labels, 1).unwrap(), 1.0);
        assert_eq!(
            knn_error_with_metric(&focus, &pts, &labels, 1).unwrap(),
            0.0
        );
    }
}
