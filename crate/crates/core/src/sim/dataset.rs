use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which of the two independent clusterings labels the constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    A,
    B,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::A => "A",
            Partition::B => "B",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_pts: usize,
    /// Ambient dimension.
    pub n: usize,
    /// Dimension of each clustering's signal subspace.
    pub k_sub: usize,
    pub proportions_a: Vec<f64>,
    pub proportions_b: Vec<f64>,
    /// Distance of the cluster means from the origin of their subspace.
    pub mean_scale: f64,
    /// Standard deviation of each isotropic Gaussian blob.
    pub blob_scale: f64,
    /// Standard deviation of the iid noise coordinates.
    pub noise_scale: f64,
    /// Set in code; experiment runs derive it per trial.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_pts: 2000,
            n: 25,
            k_sub: 3,
            proportions_a: vec![0.5, 0.2, 0.3],
            proportions_b: vec![0.5, 0.2, 0.3],
            mean_scale: 1.0,
            blob_scale: 0.3,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pts < 2 {
            return Err(Error::InvalidConfig("n_pts must be >= 2".into()));
        }
        if self.k_sub == 0 || 2 * self.k_sub > self.n {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k_sub and 2*k_sub <= n (k_sub = {}, n = {})",
                self.k_sub, self.n
            )));
        }
        for (name, p) in [
            ("proportions_a", &self.proportions_a),
            ("proportions_b", &self.proportions_b),
        ] {
            if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("{name} must sum to 1")));
            }
            if p.len() > self.n_pts {
                return Err(Error::InvalidConfig(format!(
                    "{name} has more clusters than points"
                )));
            }
        }
        for (name, v) in [
            ("mean_scale", self.mean_scale),
            ("blob_scale", self.blob_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Points with two independent clusterings living in disjoint coordinate blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    /// `n_pts × n`, one point per row.
    pub points: DMatrix<f64>,
    pub labels_a: Vec<usize>,
    pub labels_b: Vec<usize>,
    pub k_sub: usize,
}

impl SyntheticDataset {
    pub fn n_pts(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn labels(&self, partition: Partition) -> &[usize] {
        match partition {
            Partition::A => &self.labels_a,
            Partition::B => &self.labels_b,
        }
    }

    pub fn n_clusters(&self, partition: Partition) -> usize {
        self.labels(partition).iter().max().map_or(0, |m| m + 1)
    }

    /// First coordinate of the partition's signal block.
    pub fn block_offset(&self, partition: Partition) -> usize {
        match partition {
            Partition::A => 0,
            Partition::B => self.k_sub,
        }
    }
}

/// Cluster sizes from proportions by largest remainder, summing to `n_pts`.
pub fn cluster_sizes(proportions: &[f64], n_pts: usize) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| p * n_pts as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut short = n_pts - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if short == 0 {
            break;
        }
        sizes[i] += 1;
        short -= 1;
    }
    sizes
}

fn cluster_means(k: usize, k_sub: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            if k <= k_sub {
                let mut m = vec![0.0; k_sub];
                m[c] = scale;
                m
            } else {
                let v: Vec<f64> = (0..k_sub).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| scale * x / norm).collect()
            }
        })
        .collect()
}

fn labels_from_sizes(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect()
}

/// Generates the clustered dataset: partition A in coordinates `[0, k_sub)`, partition B in
/// `[k_sub, 2·k_sub)`, iid Gaussian noise elsewhere. Deterministic in `cfg.seed`.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels_a = labels_from_sizes(&cluster_sizes(&cfg.proportions_a, cfg.n_pts));
    let mut labels_b = labels_from_sizes(&cluster_sizes(&cfg.proportions_b, cfg.n_pts));
    labels_b.shuffle(&mut rng);

    let means_a = cluster_means(cfg.proportions_a.len(), cfg.k_sub, cfg.mean_scale, &mut rng);
    let means_b = cluster_means(cfg.proportions_b.len(), cfg.k_sub, cfg.mean_scale, &mut rng);

    let mut points = DMatrix::zeros(cfg.n_pts, cfg.n);
    for i in 0..cfg.n_pts {
        for d in 0..cfg.k_sub {
            let ga: f64 = rng.sample(StandardNormal);
            let gb: f64 = rng.sample(StandardNormal);
            points[(i, d)] = means_a[labels_a[i]][d] + cfg.blob_scale * ga;
            points[(i, cfg.k_sub + d)] = means_b[labels_b[i]][d] + cfg.blob_scale * gb;
        }
        for d in (2 * cfg.k_sub)..cfg.n {
            let g: f64 = rng.sample(StandardNormal);
            points[(i, d)] = cfg.noise_scale * g;
        }
    }
    Ok(SyntheticDataset {
        points,
        labels_a,
        labels_b,
        k_sub: cfg.k_sub,
    })
}
