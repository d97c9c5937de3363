mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ocelad::eval::{
    dynamic_regret, embedding_from_metric, exceedance_probability, kmeans, knn_error,
    knn_error_with_metric, log_log_slope, nmi, RegretLedger,
};
use ocelad::sim::dataset::cluster_sizes;
use ocelad::sim::rotation::rotation_from_generator;
use ocelad::sim::{
    generate_dataset, rotation_step, run_scenario, DatasetConfig, DriftScenario, PairingPolicy,
    Partition, Segment,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::*;

/// NMI with the geometric-mean normalisation, from the contingency table.
fn nmi_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ca: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let h = |c: &BTreeMap<usize, usize>| {
        -c.values()
            .map(|&k| k as f64 / n)
            .map(|p| p * p.ln())
            .sum::<f64>()
    };
    let (ha, hb) = (h(&ca), h(&cb));
    if ca.len() == 1 || cb.len() == 1 {
        return 0.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|((x, y), &k)| {
            let p = k as f64 / n;
            p * (p * n * n / (ca[x] as f64 * cb[y] as f64)).ln()
        })
        .sum();
    mi / (ha * hb).sqrt()
}

/// Leave-one-out k-NN error by brute force; ties in distance go to the lower index and vote
/// ties to the smallest label.
fn knn_oracle(points: &DMatrix<f64>, labels: &[usize], k: usize) -> f64 {
    let n = points.nrows();
    let mut errors = 0;
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((points.row(i) - points.row(j)).norm_squared(), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for &(_, j) in d.iter().take(k) {
            *votes.entry(labels[j]).or_default() += 1;
        }
        let best = votes.values().copied().max().unwrap();
        let pred = votes
            .iter()
            .find(|(_, v)| **v == best)
            .map(|(l, _)| *l)
            .unwrap();
        if pred != labels[i] {
            errors += 1;
        }
    }
    errors as f64 / n as f64
}

fn gaussian_points(n_pts: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n_pts, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn nmi_matches_contingency_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let n = rng.random_range(5..300);
        let ka = rng.random_range(1..6);
        let kb = rng.random_range(1..6);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = a
            .iter()
            .map(|&x| {
                if rng.random_bool(0.7) {
                    x
                } else {
                    rng.random_range(0..kb)
                }
            })
            .collect();
        let got = nmi(&a, &b).unwrap();
        let want = nmi_oracle(&a, &b);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn nmi_extremes() {
    let a: Vec<usize> = (0..1000).map(|i| i % 4).collect();
    let relabeled: Vec<usize> = a.iter().map(|x| 3 - x).collect();
    assert!((nmi(&a, &relabeled).unwrap() - 1.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let b: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
    let c: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
    assert!(nmi(&b, &c).unwrap() < 0.01);
    assert!(nmi(&a, &a[..10]).is_err());
}

#[test]
fn knn_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..10 {
        let pts = gaussian_points(80, 3, &mut rng);
        let labels: Vec<usize> = (0..80)
            .map(|i| (i * 7 % 3 + (pts[(i, 0)] > 0.0) as usize) % 3)
            .collect();
        for k in [1, 3, 5] {
            assert_eq!(
                knn_error(&pts, &labels, k).unwrap(),
                knn_oracle(&pts, &labels, k)
            );
        }
    }
}

#[test]
fn knn_on_random_labels_is_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let pts = gaussian_points(2000, 4, &mut rng);
    let labels: Vec<usize> = (0..2000).map(|_| rng.random_range(0..2)).collect();
    let e = knn_error(&pts, &labels, 5).unwrap();
    assert!((e - 0.5).abs() < 0.05, "error {e}");
}

#[test]
fn embedding_reconstructs_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for n in 1..=6 {
        let m = random_psd(n, 1.0, &mut rng);
        let l = embedding_from_metric(&m, n).unwrap().l;
        assert!((l.transpose() * &l - &m).norm() < 1e-9);
    }
    // truncation keeps the dominant eigen-directions
    let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.5, 4.0, 1.0]));
    let l = embedding_from_metric(&m, 2).unwrap().l;
    let want = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.0, 4.0, 1.0]));
    assert!((l.transpose() * &l - want).norm() < 1e-12);
    assert!(embedding_from_metric(&m, 0).is_err());
}

#[test]
fn knn_with_metric_equals_knn_on_embedded_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let pts = gaussian_points(100, 4, &mut rng);
    let labels: Vec<usize> = (0..100).map(|i| (pts[(i, 1)] > 0.2) as usize).collect();
    let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.0, 1.0, 0.0, 0.0]));
    let projected = DMatrix::from_fn(100, 1, |i, _| pts[(i, 1)]);
    assert_eq!(
        knn_error_with_metric(&m, &pts, &labels, 3).unwrap(),
        knn_oracle(&projected, &labels, 3)
    );
}

#[test]
fn kmeans_recovers_separated_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let mut truth = Vec::new();
    let pts = DMatrix::from_fn(300, 2, |i, d| {
        centers[i % 3][d] + 0.3 * rng.sample::<f64, _>(StandardNormal)
    });
    for i in 0..300 {
        truth.push(i % 3);
    }
    let fit = kmeans(&pts, 3, 5).unwrap();
    assert!((nmi(&fit.labels, &truth).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(kmeans(&pts, 3, 5).unwrap(), fit);
}

#[test]
fn exceedance_counts_strictly_greater() {
    assert_eq!(exceedance_probability(&[0.5, 0.8, 0.9, 1.0], 0.8), 0.5);
}

#[test]
fn log_log_slope_recovers_power() {
    let xs: Vec<f64> = (1..=8).map(|k| 2f64.powi(k)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.5)).collect();
    assert!((log_log_slope(&xs, &ys).unwrap() - 0.5).abs() < 1e-12);
    assert!(log_log_slope(&xs, &[0.0; 8]).is_err());
}

proptest! {
    #[test]
    fn regret_is_additive_over_adjacent_intervals(
        rows in prop::collection::vec((0.0..3.0f64, 0.0..3.0f64, 0.0..1.0f64), 2..60),
        cut in 0.0..1.0f64,
    ) {
        let mut ledger = RegretLedger::new();
        for (a, c, p) in &rows {
            ledger.push(*a, *c, *p).unwrap();
        }
        let s = rows.len() as u64;
        let m = 1 + ((s - 1) as f64 * cut) as u64;
        let m = m.min(s - 1);
        let (whole, pw) = dynamic_regret(&ledger, 1, s).unwrap();
        let (left, pl) = dynamic_regret(&ledger, 1, m).unwrap();
        let (right, pr) = dynamic_regret(&ledger, m + 1, s).unwrap();
        prop_assert!((whole - left - right).abs() < 1e-9);
        prop_assert!((pw - pl - pr).abs() < 1e-9);
    }

    #[test]
    fn knn_is_invariant_under_rotation_and_translation(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = gaussian_points(40, 3, &mut rng);
        let labels: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
        let g = rotation_from_generator(&ocelad::sim::rotation::random_skew(3, &mut rng), 1.3);
        let shift = DVector::from_row_slice(&[1.0, -2.0, 0.5]).transpose();
        let moved = DMatrix::from_fn(40, 3, |i, j| (pts.row(i) * g.transpose() + &shift)[j]);
        prop_assert_eq!(knn_error(&pts, &labels, 3).unwrap(), knn_error(&moved, &labels, 3).unwrap());
    }

    #[test]
    fn nmi_is_symmetric_and_label_invariant(a in prop::collection::vec(0usize..4, 2..100), seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut rng);
        let a2: Vec<usize> = a.iter().map(|x| perm[*x]).collect();
        let v = nmi(&a, &b).unwrap();
        prop_assert!((v - nmi(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((v - nmi(&a2, &b).unwrap()).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
    }
}

#[test]
fn rotation_of_ninety_degrees_in_the_plane() {
    let k = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]) / 2f64.sqrt();
    let g = rotation_from_generator(&k, std::f64::consts::PI * 2f64.sqrt() / 2.0);
    let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    assert!((g - want).norm() < 1e-12);
}

#[test]
fn rotations_are_isometries_and_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let p0 = gaussian_points(30, 6, &mut rng);
    let mut pts = p0.clone();
    let mut total = DMatrix::<f64>::identity(6, 6);
    for _ in 0..25 {
        let (next, g) = rotation_step(&pts, 0.05, &mut rng);
        assert!((g.transpose() * &g - DMatrix::<f64>::identity(6, 6)).norm() < 1e-12);
        for i in 0..30 {
            for j in 0..30 {
                let before = (pts.row(i) - pts.row(j)).norm();
                let after = (next.row(i) - next.row(j)).norm();
                assert!((before - after).abs() < 1e-9);
            }
        }
        total = g * total;
        pts = next;
    }
    assert!((&p0 * total.transpose() - &pts).norm() < 1e-8);
}

#[test]
fn dataset_has_requested_proportions_and_blocks() {
    let cfg = DatasetConfig {
        n_pts: 1000,
        n: 8,
        seed: 4,
        ..DatasetConfig::default()
    };
    let data = generate_dataset(&cfg).unwrap();
    assert_eq!(cluster_sizes(&cfg.proportions_a, 1000), vec![500, 200, 300]);
    for p in [Partition::A, Partition::B] {
        let mut counts = [0usize; 3];
        for &l in data.labels(p) {
            counts[l] += 1;
        }
        assert_eq!(counts, [500, 200, 300]);
    }
    assert_eq!(data.block_offset(Partition::B), 3);
    assert_eq!(generate_dataset(&cfg).unwrap().points, data.points);
}

#[test]
fn scenario_stream_follows_segments() {
    let cfg = DatasetConfig {
        n_pts: 60,
        n: 7,
        seed: 5,
        ..DatasetConfig::default()
    };
    let data = Arc::new(generate_dataset(&cfg).unwrap());
    let scenario = DriftScenario {
        segments: vec![
            Segment {
                duration: 5,
                partition: Partition::A,
                drift_rate: 0.0,
            },
            Segment {
                duration: 7,
                partition: Partition::B,
                drift_rate: 0.02,
            },
        ],
        seed: 9,
    };
    let steps: Vec<_> = run_scenario(data.clone(), scenario, PairingPolicy::Balanced)
        .unwrap()
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    assert_eq!(steps.len(), 12);
    for s in &steps[..5] {
        assert_eq!(s.truth.partition, Partition::A);
        assert_eq!(*s.truth.points, data.points);
    }
    for s in &steps[5..] {
        assert_eq!(s.truth.partition, Partition::B);
        let labels = data.labels(Partition::B);
        let xi = (0..60)
            .find(|&i| s.truth.points.row(i).transpose() == *s.constraint.x())
            .unwrap();
        let zi = (0..60)
            .find(|&i| s.truth.points.row(i).transpose() == *s.constraint.z())
            .unwrap();
        assert_eq!(
            labels[xi] == labels[zi],
            s.constraint.y() == ocelad::Label::Similar
        );
    }
    assert!(
        (&*steps[11].truth.points - &data.points * steps[11].truth.rotation.transpose()).norm()
            < 1e-8
    );
}
