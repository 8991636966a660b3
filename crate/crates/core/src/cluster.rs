//! Time-of-day clustering of the 144 ten-minute intervals.
//!
//! Each interval is described by the mean, 90 % and 10 % quantile of its
//! demand across all observed days. Features are standardized and grouped with
//! seeded k-means++ and Lloyd iterations. Cluster ids are canonicalized by
//! first appearance in the day, so equivalent partitions get equal labels.

use chrono::{DateTime, Utc};
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AlignedSeries, DayClock, INTERVALS_PER_DAY};
use crate::quantile::{mean, quantile_sorted, sort_floats};

pub const MAX_ITERATIONS: usize = 300;
pub const FEATURE_NAMES: [&str; 3] = ["mean_kW", "q90_kW", "q10_kW"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("series covers {0} intervals, at least one full day (144) is needed")]
    TooShort(usize),
    #[error("interval {interval} ({time}) has no demand samples")]
    EmptyInterval { interval: usize, time: String },
    #[error("number of clusters must be in 1..=144, got {0}")]
    InvalidClusterCount(usize),
    #[error("{n_cluster} clusters requested but only {distinct} distinct feature points exist")]
    Degenerate { n_cluster: usize, distinct: usize },
    #[error("expected 144 interval features, got {0}")]
    FeatureCount(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFeatures {
    pub interval_index: usize,
    #[serde(rename = "mean_kW")]
    pub mean_kw: f64,
    #[serde(rename = "q90_kW")]
    pub q90_kw: f64,
    #[serde(rename = "q10_kW")]
    pub q10_kw: f64,
    pub sample_count: usize,
}

impl IntervalFeatures {
    pub fn vector(&self) -> [f64; 3] {
        [self.mean_kw, self.q90_kw, self.q10_kw]
    }
}

/// `HH:MM` label of an interval of day.
pub fn interval_label(interval: usize) -> String {
    let minutes = interval * 10;
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

/// Per-interval demand statistics over every observed day.
pub fn compute_features(series: &AlignedSeries) -> Result<Vec<IntervalFeatures>, ClusterError> {
    if series.len() < INTERVALS_PER_DAY {
        return Err(ClusterError::TooShort(series.len()));
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); INTERVALS_PER_DAY];
    for (i, v) in series.demand_kw.iter().enumerate() {
        if let Some(v) = v {
            samples[series.interval_of_day(i)].push(*v);
        }
    }
    samples
        .into_iter()
        .enumerate()
        .map(|(interval, mut values)| {
            if values.is_empty() {
                return Err(ClusterError::EmptyInterval {
                    interval,
                    time: interval_label(interval),
                });
            }
            sort_floats(&mut values);
            Ok(IntervalFeatures {
                interval_index: interval,
                mean_kw: mean(&values),
                q90_kw: quantile_sorted(&values, 0.9),
                q10_kw: quantile_sorted(&values, 0.1),
                sample_count: values.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub mean: f64,
    pub stddev: f64,
    /// False when the feature was constant and left out of the distance.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub n_cluster: usize,
    pub assignment: Vec<usize>,
    /// `n_cluster × 3` in standardized feature space.
    pub centroids: Vec<[f64; 3]>,
    pub feature_scaling: [FeatureScaling; 3],
    pub seed: u64,
    pub clock: DayClock,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss_history: Vec<f64>,
}

impl ClusterModel {
    /// Everything in one cluster.
    pub fn single(clock: DayClock) -> Self {
        Self {
            n_cluster: 1,
            assignment: vec![0; INTERVALS_PER_DAY],
            centroids: vec![[0.0; 3]],
            feature_scaling: [FeatureScaling { mean: 0.0, stddev: 0.0, active: false }; 3],
            seed: 0,
            clock,
            wcss_history: vec![],
        }
    }

    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_cluster];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Applies `new_id = permutation[old_id]`.
    pub fn relabel(&self, permutation: &[usize]) -> Self {
        let mut out = self.clone();
        out.assignment = self.assignment.iter().map(|&c| permutation[c]).collect();
        let mut centroids = vec![[0.0; 3]; self.n_cluster];
        for (old, &new) in permutation.iter().enumerate() {
            centroids[new] = self.centroids[old];
        }
        out.centroids = centroids;
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cluster model serializes")
    }
}

pub fn cluster_of(model: &ClusterModel, timestamp: DateTime<Utc>) -> usize {
    model.assignment[model.clock.interval_of_day(timestamp)]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn standardize(features: &[IntervalFeatures], n_cluster: usize) -> ([FeatureScaling; 3], Vec<[f64; 3]>) {
    let raw: Vec<[f64; 3]> = features.iter().map(IntervalFeatures::vector).collect();
    let n = raw.len() as f64;
    let mut scaling = [FeatureScaling { mean: 0.0, stddev: 0.0, active: false }; 3];
    for (j, s) in scaling.iter_mut().enumerate() {
        let m = raw.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = raw.iter().map(|p| (p[j] - m) * (p[j] - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        *s = FeatureScaling {
            mean: m,
            stddev: sd,
            active: sd > 0.0,
        };
        if sd == 0.0 && n_cluster > 1 {
            warn!("feature {} is constant; dropped from clustering", FEATURE_NAMES[j]);
        }
    }
    let points = raw
        .iter()
        .map(|p| {
            let mut z = [0.0; 3];
            for j in 0..3 {
                if scaling[j].active {
                    z[j] = (p[j] - scaling[j].mean) / scaling[j].stddev;
                }
            }
            z
        })
        .collect();
    (scaling, points)
}

fn distinct_count(points: &[[f64; 3]]) -> usize {
    let mut keys: Vec<[u64; 3]> = points
        .iter()
        .map(|p| [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()])
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn kmeans_pp_init(points: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = d2.iter().rposition(|&d| d > 0.0).expect("distinct points remain");
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            if target < d {
                chosen = i;
                break;
            }
            target -= d;
        }
        let c = points[chosen];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(p: &[f64; 3], centroids: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn update_centroids(points: &[[f64; 3]], assignment: &mut [usize], k: usize) -> Vec<[f64; 3]> {
    loop {
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(assignment.iter()) {
            for j in 0..3 {
                sums[c][j] += p[j];
            }
            counts[c] += 1;
        }
        let centroids: Vec<[f64; 3]> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| {
                if n == 0 {
                    [f64::NAN; 3]
                } else {
                    [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64]
                }
            })
            .collect();
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return centroids;
        };
        // Reseed the empty cluster with the point farthest from its centroid.
        let far = (0..points.len())
            .filter(|&i| counts[assignment[i]] > 1)
            .max_by(|&a, &b| {
                dist2(&points[a], &centroids[assignment[a]])
                    .total_cmp(&dist2(&points[b], &centroids[assignment[b]]))
                    .then(b.cmp(&a))
            })
            .expect("more points than clusters");
        assignment[far] = empty;
    }
}

fn wcss(points: &[[f64; 3]], assignment: &[usize], centroids: &[[f64; 3]]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| dist2(p, &centroids[c]))
        .sum()
}

/// Relabels clusters in order of first appearance through the day.
fn canonicalize(assignment: &mut [usize], centroids: &mut Vec<[f64; 3]>) {
    let k = centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for c in assignment.iter() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
    }
    for c in assignment.iter_mut() {
        *c = map[*c];
    }
    let mut reordered = vec![[0.0; 3]; k];
    for (old, &new) in map.iter().enumerate() {
        reordered[new] = centroids[old];
    }
    *centroids = reordered;
}

pub fn kmeans_fit(
    features: &[IntervalFeatures],
    n_cluster: usize,
    seed: u64,
    clock: DayClock,
) -> Result<ClusterModel, ClusterError> {
    if features.len() != INTERVALS_PER_DAY {
        return Err(ClusterError::FeatureCount(features.len()));
    }
    if n_cluster == 0 || n_cluster > INTERVALS_PER_DAY {
        return Err(ClusterError::InvalidClusterCount(n_cluster));
    }
    let (scaling, points) = standardize(features, n_cluster);
    let distinct = distinct_count(&points);
    if n_cluster > distinct {
        return Err(ClusterError::Degenerate { n_cluster, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(&points, n_cluster, &mut rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        centroids = update_centroids(&points, &mut assignment, n_cluster);
        history.push(wcss(&points, &assignment, &centroids));
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    canonicalize(&mut assignment, &mut centroids);
    Ok(ClusterModel {
        n_cluster,
        assignment,
        centroids,
        feature_scaling: scaling,
        seed,
        clock,
        wcss_history: history,
    })
}

/// Final WCSS for each `k` in `1..=k_max`; degenerate counts are skipped.
pub fn elbow_scores(
    features: &[IntervalFeatures],
    k_max: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>, ClusterError> {
    let mut out = Vec::new();
    for k in 1..=k_max.min(INTERVALS_PER_DAY) {
        match kmeans_fit(features, k, seed, DayClock::default()) {
            Ok(m) => out.push((k, m.wcss())),
            Err(ClusterError::Degenerate { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
