//! Demand model: the 90 % quantile of building demand per cluster and
//! outdoor-temperature bin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{cluster_of, ClusterModel};
use crate::ingest::AlignedSeries;
use crate::quantile::{quantile_sorted, sort_floats};

pub const DEFAULT_BIN_WIDTH_K: f64 = 1.0;
pub const DEFAULT_MIN_SAMPLES: usize = 6;
pub const DEMAND_QUANTILE: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("bin width must be finite and > 0, got {0}")]
    InvalidBinWidth(f64),
    #[error("min_samples must be >= 1")]
    InvalidMinSamples,
    #[error("no (cluster, temperature) cell reached {min_samples} samples")]
    Empty { min_samples: usize },
}

/// Bin index of a temperature; halves round away from zero.
pub fn bin_index(t_out_c: f64, bin_width_k: f64) -> i64 {
    (t_out_c / bin_width_k).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandBin {
    pub bin: i64,
    #[serde(rename = "t_out_C")]
    pub t_out_c: f64,
    #[serde(rename = "q90_demand_kW")]
    pub q90_demand_kw: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDemand {
    pub cluster: usize,
    /// Sorted by `bin`; absent bins are gaps.
    pub bins: Vec<DemandBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    #[serde(rename = "bin_width_K")]
    pub bin_width_k: f64,
    pub min_samples: usize,
    pub clusters: Vec<ClusterDemand>,
    /// Observed outdoor temperature range over all used samples.
    #[serde(rename = "t_out_range_C")]
    pub t_out_range_c: (f64, f64),
}

impl DemandModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("demand model serializes")
    }

    /// `cluster,t_out_bin,q90_kW,n` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster,t_out_bin,q90_kW,n\n");
        for c in &self.clusters {
            for b in &c.bins {
                out.push_str(&format!("{},{},{},{}\n", c.cluster, b.t_out_c, b.q90_demand_kw, b.sample_count));
            }
        }
        out
    }
}

pub fn fit_demand(
    series: &AlignedSeries,
    clusters: &ClusterModel,
    bin_width_k: f64,
    min_samples: usize,
) -> Result<DemandModel, DemandError> {
    if !(bin_width_k.is_finite() && bin_width_k > 0.0) {
        return Err(DemandError::InvalidBinWidth(bin_width_k));
    }
    if min_samples == 0 {
        return Err(DemandError::InvalidMinSamples);
    }
    let mut cells: Vec<std::collections::BTreeMap<i64, Vec<f64>>> =
        vec![Default::default(); clusters.n_cluster];
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..series.len() {
        let (Some(q), Some(t)) = (series.demand_kw[i], series.t_out_c[i]) else {
            continue;
        };
        let c = cluster_of(clusters, series.time_at(i));
        cells[c].entry(bin_index(t, bin_width_k)).or_default().push(q);
        range = (range.0.min(t), range.1.max(t));
    }
    let clusters: Vec<ClusterDemand> = cells
        .into_iter()
        .enumerate()
        .map(|(cluster, bins)| ClusterDemand {
            cluster,
            bins: bins
                .into_iter()
                .filter(|(_, v)| v.len() >= min_samples)
                .map(|(bin, mut v)| {
                    sort_floats(&mut v);
                    DemandBin {
                        bin,
                        t_out_c: bin as f64 * bin_width_k,
                        q90_demand_kw: quantile_sorted(&v, DEMAND_QUANTILE),
                        sample_count: v.len(),
                    }
                })
                .collect(),
        })
        .collect();
    if clusters.iter().all(|c| c.bins.is_empty()) {
        return Err(DemandError::Empty { min_samples });
    }
    Ok(DemandModel {
        bin_width_k,
        min_samples,
        clusters,
        t_out_range_c: range,
    })
}

/// Demand of the bin containing `t_out_c`, or `None` for a gap.
pub fn query_demand(model: &DemandModel, cluster: usize, t_out_c: f64) -> Option<f64> {
    let bins = &model.clusters.get(cluster)?.bins;
    let key = bin_index(t_out_c, model.bin_width_k);
    bins.binary_search_by_key(&key, |b| b.bin)
        .ok()
        .map(|i| bins[i].q90_demand_kw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DayClock;
    use chrono::{TimeZone, Utc};

    fn series(demand: Vec<f64>, t_out: Vec<f64>) -> AlignedSeries {
        AlignedSeries {
            start: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap(),
            clock: DayClock::default(),
            demand_kw: demand.into_iter().map(Some).collect(),
            t_out_c: t_out.into_iter().map(Some).collect(),
        }
    }

    fn one_cluster() -> ClusterModel {
        ClusterModel::single(DayClock::default())
    }

    #[test]
    fn constant_demand() {
        let t: Vec<f64> = (0..600).map(|i| -10.0 + (i % 30) as f64).collect();
        let m = fit_demand(&series(vec![10.0; 600], t), &one_cluster(), 1.0, 6).unwrap();
        assert!(!m.clusters[0].bins.is_empty());
        assert!(m.clusters[0].bins.iter().all(|b| b.q90_demand_kw == 10.0));
    }

    #[test]
    fn noiseless_linear_demand() {
        let t: Vec<f64> = (0..400).map(|i| -10.0 + (i % 20) as f64).collect();
        let q: Vec<f64> = t.iter().map(|t| 2.0 * (20.0 - t)).collect();
        let m = fit_demand(&series(q, t), &one_cluster(), 1.0, 6).unwrap();
        assert_eq!(query_demand(&m, 0, 0.0), Some(40.0));
    }

    #[test]
    fn observed_range_bounds_bins() {
        let t: Vec<f64> = (0..310).map(|i| -7.0 + (i % 31) as f64).collect();
        let m = fit_demand(&series(vec![1.0; 310], t), &one_cluster(), 1.0, 6).unwrap();
        assert_eq!(m.t_out_range_c, (-7.0, 23.0));
        assert_eq!(query_demand(&m, 0, -8.0), None);
        assert_eq!(query_demand(&m, 0, 24.0), None);
        assert!(query_demand(&m, 0, -7.0).is_some());
    }

    #[test]
    fn query_uses_containing_bin() {
        let mut t = vec![-5.0; 10];
        t.extend([3.0; 10]);
        let mut q = vec![35.0; 10];
        q.extend([5.0; 10]);
        let m = fit_demand(&series(q, t), &one_cluster(), 1.0, 6).unwrap();
        assert_eq!(query_demand(&m, 0, -4.7), Some(35.0));
        assert_eq!(query_demand(&m, 0, -4.5), Some(35.0));
        assert_eq!(query_demand(&m, 0, 0.0), None);
        assert_eq!(bin_index(-4.5, 1.0), -5);
        assert_eq!(bin_index(4.5, 1.0), 5);
        assert_eq!(bin_index(-4.49, 1.0), -4);
    }

    #[test]
    fn sparse_bins_are_gaps() {
        let mut t = vec![0.0; 10];
        t.extend([5.0; 3]);
        let m = fit_demand(&series(vec![1.0; 13], t), &one_cluster(), 1.0, 6).unwrap();
        assert_eq!(m.clusters[0].bins.len(), 1);
        assert_eq!(query_demand(&m, 0, 5.0), None);
    }

    #[test]
    fn all_empty_is_error() {
        let m = fit_demand(&series(vec![1.0; 3], vec![0.0; 3]), &one_cluster(), 1.0, 6);
        assert_eq!(m, Err(DemandError::Empty { min_samples: 6 }));
    }

    #[test]
    fn invalid_parameters() {
        let s = series(vec![1.0; 3], vec![0.0; 3]);
        assert!(matches!(fit_demand(&s, &one_cluster(), 0.0, 1), Err(DemandError::InvalidBinWidth(_))));
        assert_eq!(fit_demand(&s, &one_cluster(), 1.0, 0), Err(DemandError::InvalidMinSamples));
    }

    #[test]
    fn half_kelvin_bins() {
        let t = vec![0.26; 6];
        let m = fit_demand(&series(vec![2.0; 6], t), &one_cluster(), 0.5, 6).unwrap();
        assert_eq!(m.clusters[0].bins[0].t_out_c, 0.5);
    }
}
