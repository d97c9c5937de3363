use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `K × d`, one centroid per row.
    pub centroids: DMatrix<f64>,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn check(points: &DMatrix<f64>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    if k > points.nrows() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the number of points ({})",
            points.nrows()
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("points"));
    }
    Ok(())
}

fn plus_plus_init<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n_pts = points.nrows();
    let mut centroids = DMatrix::zeros(k, points.ncols());
    centroids.set_row(0, &points.row(rng.random_range(0..n_pts)));
    let mut nearest: Vec<f64> = (0..n_pts)
        .map(|i| sq_dist(points, i, &centroids, 0))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n_pts - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n_pts)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

/// One k-means++ seeded Lloyd run driven by `rng`.
pub fn kmeans_single<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> Result<KMeansResult> {
    check(points, k)?;
    let n_pts = points.nrows();
    let dim = points.ncols();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![usize::MAX; n_pts];
    let mut dists = vec![0.0; n_pts];

    for _ in 0..MAX_ITER {
        let mut changed = false;
        for i in 0..n_pts {
            let (best, d) = (0..k).map(|c| (c, sq_dist(points, i, &centroids, c))).fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
            dists[i] = d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n_pts {
            let mut row = sums.row_mut(labels[i]);
            row += points.row(i);
            counts[labels[i]] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = sums.row(c) / count as f64;
                centroids.set_row(c, &mean);
            } else {
                // empty cluster: move it onto the point worst served by its centroid
                let far = (0..n_pts)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                centroids.set_row(c, &points.row(far));
                dists[far] = 0.0;
            }
        }
    }
    let inertia = (0..n_pts)
        .map(|i| sq_dist(points, i, &centroids, labels[i]))
        .sum();
    Ok(KMeansResult {
        labels,
        centroids,
        inertia,
    })
}

/// RNG used by restart `r` of [`kmeans`] with seed `seed`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

/// Best-inertia partition over `restarts` k-means++ runs. Deterministic in `seed`.
pub fn kmeans_with_restarts(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<KMeansResult> {
    check(points, k)?;
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let run = kmeans_single(points, k, &mut restart_rng(seed, r))?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// [`kmeans_with_restarts`] with the default 10 restarts.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with_restarts(points, k, seed, DEFAULT_RESTARTS)
}
