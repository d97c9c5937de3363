use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Partition, SyntheticDataset};
use super::rotation::rotation_step;
use crate::metric::{Constraint, Label, MetricState};
use crate::{Error, Result};

/// Per-step rotation magnitudes used by the default drift profile.
pub const SLOW_DRIFT: f64 = 1e-4;
pub const MODERATE_DRIFT: f64 = 1e-3;
pub const FAST_DRIFT: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration: u64,
    pub partition: Partition,
    /// Rotation magnitude per step (radians of unit-norm generator).
    pub drift_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftScenario {
    pub segments: Vec<Segment>,
    pub seed: u64,
}

impl DriftScenario {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig(
                "scenario needs at least one segment".into(),
            ));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if s.duration == 0 {
                return Err(Error::InvalidConfig(format!(
                    "segment {i}: duration must be >= 1"
                )));
            }
            if !s.drift_rate.is_finite() || s.drift_rate < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "segment {i}: drift rate must be >= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> u64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Static A, then B under moderate, fast and moderate drift, then back to A with slow
    /// drift. `unit` is the length of each segment in steps.
    pub fn standard_profile(unit: u64, seed: u64) -> Self {
        let seg = |partition, drift_rate| Segment {
            duration: unit,
            partition,
            drift_rate,
        };
        Self {
            segments: vec![
                seg(Partition::A, 0.0),
                seg(Partition::B, MODERATE_DRIFT),
                seg(Partition::B, FAST_DRIFT),
                seg(Partition::B, MODERATE_DRIFT),
                seg(Partition::A, SLOW_DRIFT),
            ],
            seed,
        }
    }

    /// Steps `t` (1-based) at which the active partition changes.
    pub fn switch_steps(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut start = 1;
        for w in self.segments.windows(2) {
            start += w[0].duration;
            if w[0].partition != w[1].partition {
                out.push(start);
            }
        }
        out
    }

    /// `(first step, last step)` of every segment.
    pub fn segment_bounds(&self) -> Vec<(u64, u64)> {
        let mut start = 1;
        self.segments
            .iter()
            .map(|s| {
                let b = (start, start + s.duration - 1);
                start += s.duration;
                b
            })
            .collect()
    }
}

/// How constraint pairs are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingPolicy {
    /// Similar and dissimilar pairs with probability ½ each, uniform within each type.
    #[default]
    Balanced,
    /// Uniform over all pairs of distinct points.
    Uniform,
}

fn distinct_pair<R: Rng + ?Sized>(n_pts: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n_pts);
    let mut j = rng.random_range(0..n_pts - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Draws one labelled pair from the current `points` under `labels`.
pub fn sample_constraint<R: Rng + ?Sized>(
    t: u64,
    points: &DMatrix<f64>,
    labels: &[usize],
    policy: PairingPolicy,
    rng: &mut R,
) -> Result<Constraint<f64>> {
    let n_pts = points.nrows();
    if n_pts < 2 || labels.len() != n_pts {
        return Err(Error::InvalidArgument(
            "need at least two labelled points to sample a pair".into(),
        ));
    }
    let (i, j) = match policy {
        PairingPolicy::Uniform => distinct_pair(n_pts, rng),
        PairingPolicy::Balanced => {
            let first = labels[0];
            let has_two_clusters = labels.iter().any(|&l| l != first);
            let mut counts = std::collections::BTreeMap::new();
            for &l in labels {
                *counts.entry(l).or_insert(0usize) += 1;
            }
            let has_same_pair = counts.values().any(|&c| c >= 2);
            let want_same = match (has_same_pair, has_two_clusters) {
                (true, true) => rng.random_bool(0.5),
                (true, false) => true,
                _ => false,
            };
            loop {
                let (i, j) = distinct_pair(n_pts, rng);
                if (labels[i] == labels[j]) == want_same {
                    break (i, j);
                }
            }
        }
    };
    let y = if labels[i] == labels[j] {
        Label::Similar
    } else {
        Label::Dissimilar
    };
    Constraint::new(
        t,
        DVector::from_iterator(points.ncols(), points.row(i).iter().copied()),
        DVector::from_iterator(points.ncols(), points.row(j).iter().copied()),
        y,
    )
}

/// Ground truth emitted alongside each constraint.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub t: u64,
    pub segment: usize,
    pub partition: Partition,
    pub drift_rate: f64,
    /// Points after this step's rotation, one per row.
    pub points: Arc<DMatrix<f64>>,
    /// Cumulative rotation `G_t···G_1`; `points = points₀·(G_t···G_1)ᵀ`.
    pub rotation: Arc<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct ScenarioStep {
    pub constraint: Constraint<f64>,
    pub truth: GroundTruth,
}

/// Serializable cursor of a [`ScenarioStream`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    pub next_t: u64,
    pub rng: ChaCha8Rng,
    pub points: Vec<Vec<f64>>,
    pub rotation: Vec<Vec<f64>>,
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            got: rows
                .iter()
                .map(|r| r.len())
                .find(|&l| l != ncols)
                .unwrap_or(0),
        });
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

/// Sequential generator of the drifting constraint stream. Owns its RNG.
#[derive(Clone, Debug)]
pub struct ScenarioStream {
    data: Arc<SyntheticDataset>,
    scenario: DriftScenario,
    policy: PairingPolicy,
    rng: ChaCha8Rng,
    next_t: u64,
    points: Arc<DMatrix<f64>>,
    rotation: Arc<DMatrix<f64>>,
}

impl ScenarioStream {
    pub fn new(
        data: Arc<SyntheticDataset>,
        scenario: DriftScenario,
        policy: PairingPolicy,
    ) -> Result<Self> {
        scenario.validate()?;
        let n = data.dim();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            points: Arc::new(data.points.clone()),
            rotation: Arc::new(DMatrix::identity(n, n)),
            data,
            scenario,
            policy,
            next_t: 1,
        })
    }

    pub fn dataset(&self) -> &SyntheticDataset {
        &self.data
    }

    pub fn scenario(&self) -> &DriftScenario {
        &self.scenario
    }

    pub fn points(&self) -> &Arc<DMatrix<f64>> {
        &self.points
    }

    pub fn rotation(&self) -> &Arc<DMatrix<f64>> {
        &self.rotation
    }

    pub fn next_t(&self) -> u64 {
        self.next_t
    }

    /// Segment index active at step `t`.
    pub fn segment_at(&self, t: u64) -> Option<usize> {
        self.scenario
            .segment_bounds()
            .iter()
            .position(|&(a, b)| a <= t && t <= b)
    }

    pub fn state(&self) -> StreamState {
        StreamState {
            next_t: self.next_t,
            rng: self.rng.clone(),
            points: to_rows(&self.points),
            rotation: to_rows(&self.rotation),
        }
    }

    pub fn restore(
        data: Arc<SyntheticDataset>,
        scenario: DriftScenario,
        policy: PairingPolicy,
        state: StreamState,
    ) -> Result<Self> {
        let n = data.dim();
        let points = from_rows(&state.points, n)?;
        let rotation = from_rows(&state.rotation, n)?;
        if points.nrows() != data.n_pts() || rotation.nrows() != n || state.next_t == 0 {
            return Err(Error::Checkpoint(
                "scenario state does not match dataset".into(),
            ));
        }
        let mut s = Self::new(data, scenario, policy)?;
        s.rng = state.rng;
        s.next_t = state.next_t;
        s.points = Arc::new(points);
        s.rotation = Arc::new(rotation);
        Ok(s)
    }

    fn advance(&mut self) -> Result<Option<ScenarioStep>> {
        let t = self.next_t;
        let Some(segment) = self.segment_at(t) else {
            return Ok(None);
        };
        let seg = self.scenario.segments[segment];
        if seg.drift_rate > 0.0 {
            let (points, g) = rotation_step(&self.points, seg.drift_rate, &mut self.rng);
            self.points = Arc::new(points);
            self.rotation = Arc::new(g * self.rotation.as_ref());
        }
        let constraint = sample_constraint(
            t,
            &self.points,
            self.data.labels(seg.partition),
            self.policy,
            &mut self.rng,
        )?;
        self.next_t += 1;
        Ok(Some(ScenarioStep {
            constraint,
            truth: GroundTruth {
                t,
                segment,
                partition: seg.partition,
                drift_rate: seg.drift_rate,
                points: Arc::clone(&self.points),
                rotation: Arc::clone(&self.rotation),
            },
        }))
    }
}

impl Iterator for ScenarioStream {
    type Item = Result<ScenarioStep>;

    fn next(&mut self) -> Option<Self::Item> {
        self.advance().transpose()
    }
}

/// Iterates `scenario` over `data`, one constraint and snapshot per step.
pub fn run_scenario(
    data: Arc<SyntheticDataset>,
    scenario: DriftScenario,
    policy: PairingPolicy,
) -> Result<ScenarioStream> {
    ScenarioStream::new(data, scenario, policy)
}

/// Scale and threshold of the ground-truth metric for one partition.
///
/// `M* = c·R·P·Rᵀ` with `P` the coordinate projector onto the partition's block; `c` and `μ*`
/// put the mean projected squared distance of similar pairs at `μ* − 1` and of dissimilar pairs
/// at `μ* + 1`. Rotations do not change these, so they are computed once per dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparatorCalibration {
    pub partition: Partition,
    pub scale: f64,
    pub mu: f64,
}

impl ComparatorCalibration {
    pub fn new(data: &SyntheticDataset, partition: Partition) -> Self {
        let (same, diff) = projected_pair_means(data, partition);
        let gap = diff - same;
        let (scale, mu) = if gap > 1e-12 {
            let c = 2.0 / gap;
            (c, 1.0 + c * same)
        } else {
            (1.0, 1.0)
        };
        Self {
            partition,
            scale,
            mu,
        }
    }

    /// Ground-truth metric under cumulative `rotation`.
    pub fn metric(
        &self,
        data: &SyntheticDataset,
        rotation: &DMatrix<f64>,
    ) -> Result<MetricState<f64>> {
        let n = data.dim();
        if rotation.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rotation.nrows(),
            });
        }
        let offset = data.block_offset(self.partition);
        // R·P·Rᵀ = R_B·R_Bᵀ with R_B the block's columns of R
        let block = rotation.columns(offset, data.k_sub);
        let mut m = block * block.transpose() * self.scale;
        crate::linalg::symmetrize(&mut m);
        MetricState::new(m, self.mu)
    }
}

/// Margin-calibrated ground-truth metric for `partition` under cumulative `rotation`.
pub fn comparator_metric(
    data: &SyntheticDataset,
    partition: Partition,
    rotation: &DMatrix<f64>,
) -> Result<MetricState<f64>> {
    ComparatorCalibration::new(data, partition).metric(data, rotation)
}

/// Mean squared distance within the partition's block over similar and dissimilar pairs.
fn projected_pair_means(data: &SyntheticDataset, partition: Partition) -> (f64, f64) {
    let labels = data.labels(partition);
    let offset = data.block_offset(partition);
    let n_pts = data.n_pts();
    let (mut s_sum, mut s_cnt, mut d_sum, mut d_cnt) = (0.0, 0u64, 0.0, 0u64);
    for i in 0..n_pts {
        for j in (i + 1)..n_pts {
            let d2: f64 = (offset..offset + data.k_sub)
                .map(|d| {
                    let v = data.points[(i, d)] - data.points[(j, d)];
                    v * v
                })
                .sum();
            if labels[i] == labels[j] {
                s_sum += d2;
                s_cnt += 1;
            } else {
                d_sum += d2;
                d_cnt += 1;
            }
        }
    }
    let mean = |s: f64, c: u64| if c == 0 { 0.0 } else { s / c as f64 };
    (mean(s_sum, s_cnt), mean(d_sum, d_cnt))
}
