//! End-to-end derivation of per-cluster heatcurves from aligned data, a
//! building description and its U-value table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::building::{u_ratios_anchored, BoundaryKind, BuildingModel, URatioTable, URatios};
use crate::cluster::{compute_features, kmeans_fit, ClusterModel, IntervalFeatures};
use crate::demand::{fit_demand, DemandModel, DEFAULT_BIN_WIDTH_K, DEFAULT_MIN_SAMPLES};
use crate::heatcurve::{
    aggregate, postprocess, verify_hallway_assumption, HallwayVerification, Heatcurve,
    PostprocessOptions,
};
use crate::ingest::AlignedSeries;
use crate::lmtd::{heater_requirements, HeaterSplit, HeaterState};
use crate::loads::{allocate, hallway_capacities, HallwayAssumption, LoadsError, RoomLoads};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub n_cluster: usize,
    pub seed: u64,
    #[serde(rename = "bin_width_K")]
    pub bin_width_k: f64,
    pub min_samples: usize,
    pub hallway: HallwayAssumption,
    pub heater_split: HeaterSplit,
    #[serde(rename = "safety_offset_K")]
    pub safety_offset_k: f64,
    pub postprocess: PostprocessOptions,
    /// Boundary kind the U-value ratios are expressed against.
    pub ratio_anchor: BoundaryKind,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            n_cluster: 1,
            seed: 0,
            bin_width_k: DEFAULT_BIN_WIDTH_K,
            min_samples: DEFAULT_MIN_SAMPLES,
            hallway: HallwayAssumption::default(),
            heater_split: HeaterSplit::default(),
            safety_offset_k: 0.0,
            postprocess: PostprocessOptions::default(),
            ratio_anchor: BoundaryKind::Window,
        }
    }
}

/// Heater requirements of one (cluster, temperature) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRequirements {
    pub cluster: usize,
    #[serde(rename = "t_out_C")]
    pub t_out_c: f64,
    pub states: Vec<HeaterState>,
}

/// A demand bin that produced no heatcurve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedBin {
    pub cluster: usize,
    #[serde(rename = "t_out_C")]
    pub t_out_c: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRoom {
    pub room_id: String,
    pub floor: Option<i32>,
    pub heater_id: String,
    #[serde(rename = "max_t_sup_required_C")]
    pub max_t_sup_required_c: f64,
    pub cluster: usize,
    #[serde(rename = "t_out_C")]
    pub t_out_c: f64,
    #[serde(rename = "q_required_W")]
    pub q_required_w: f64,
    #[serde(rename = "q_nom_W")]
    pub q_nom_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalHeaterReport {
    /// Building order.
    pub rooms: Vec<CriticalRoom>,
    /// Number of computed bins in which each heater set the building setpoint.
    pub limiting_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub hallway_capacities_w: BTreeMap<String, f64>,
    pub room_loads: Vec<RoomLoads>,
    pub requirements: Vec<BinRequirements>,
    /// Aggregated, unprocessed curves.
    pub raw_curves: Vec<Heatcurve>,
    pub curves: Vec<Heatcurve>,
    pub hallway_checks: Vec<HallwayVerification>,
    pub critical: CriticalHeaterReport,
    pub skipped: Vec<SkippedBin>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub features: Vec<IntervalFeatures>,
    pub clusters: ClusterModel,
    pub demand: DemandModel,
    pub ratios: URatios,
    pub curves: CurveSet,
}

pub fn fit_clusters(
    series: &AlignedSeries,
    params: &PipelineParams,
) -> Result<(Vec<IntervalFeatures>, ClusterModel), Error> {
    let features = compute_features(series)?;
    let model = kmeans_fit(&features, params.n_cluster, params.seed, series.clock)?;
    Ok((features, model))
}

pub fn derive_curves(
    building: &BuildingModel,
    ratios: &URatios,
    demand: &DemandModel,
    params: &PipelineParams,
) -> Result<CurveSet, Error> {
    let capacities = hallway_capacities(building, &params.hallway)?;
    let max_t_in = building.max_heated_t_in_c().unwrap_or(crate::building::DEFAULT_T_IN_C);
    let mut room_loads = Vec::new();
    let mut requirements = Vec::new();
    let mut raw_curves = Vec::new();
    let mut skipped = Vec::new();
    for cluster_demand in &demand.clusters {
        let cluster = cluster_demand.cluster;
        let mut computed = Vec::new();
        for bin in &cluster_demand.bins {
            let q_w = bin.q90_demand_kw * 1000.0;
            let loads = match allocate(building, ratios, &capacities, cluster, q_w, bin.t_out_c) {
                Ok(l) => l,
                Err(e @ LoadsError::NoHeatedRoom { .. }) => {
                    skipped.push(SkippedBin {
                        cluster,
                        t_out_c: bin.t_out_c,
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let states = heater_requirements(&loads, building, params.heater_split)?;
            match aggregate(&states) {
                Some((t_sup, heater)) => computed.push((bin.bin, t_sup, heater.to_string())),
                None => skipped.push(SkippedBin {
                    cluster,
                    t_out_c: bin.t_out_c,
                    reason: "building has no non-hallway heaters".into(),
                }),
            }
            room_loads.push(loads);
            requirements.push(BinRequirements {
                cluster,
                t_out_c: bin.t_out_c,
                states,
            });
        }
        raw_curves.push(Heatcurve::from_computed(
            cluster,
            demand.bin_width_k,
            max_t_in,
            params.safety_offset_k,
            computed,
        ));
    }
    let curves = raw_curves
        .iter()
        .map(|c| postprocess(c, &params.postprocess))
        .collect::<Result<Vec<_>, _>>()?;
    let hallway_checks = raw_curves
        .iter()
        .map(|c| verify_hallway_assumption(c, params.hallway.assumed_t_sup_c))
        .collect();
    let critical = critical_heaters(building, &requirements, &raw_curves);
    Ok(CurveSet {
        hallway_capacities_w: capacities,
        room_loads,
        requirements,
        raw_curves,
        curves,
        hallway_checks,
        critical,
        skipped,
    })
}

pub fn critical_heaters(
    building: &BuildingModel,
    requirements: &[BinRequirements],
    raw_curves: &[Heatcurve],
) -> CriticalHeaterReport {
    let mut best: BTreeMap<&str, CriticalRoom> = BTreeMap::new();
    for bin in requirements {
        for s in &bin.states {
            let better = best
                .get(s.room_id.as_str())
                .is_none_or(|c| s.t_sup_required_c > c.max_t_sup_required_c);
            if better {
                best.insert(
                    s.room_id.as_str(),
                    CriticalRoom {
                        room_id: s.room_id.clone(),
                        floor: building.room(&s.room_id).and_then(|r| r.floor),
                        heater_id: s.heater_id.clone(),
                        max_t_sup_required_c: s.t_sup_required_c,
                        cluster: bin.cluster,
                        t_out_c: bin.t_out_c,
                        q_required_w: s.q_required_w,
                        q_nom_w: s.q_nom_w,
                    },
                );
            }
        }
    }
    let rooms = building
        .rooms
        .iter()
        .filter_map(|r| best.remove(r.id.as_str()))
        .collect();
    let mut limiting_counts = BTreeMap::new();
    for curve in raw_curves {
        for p in &curve.points {
            if let Some(h) = &p.limiting_heater {
                *limiting_counts.entry(h.clone()).or_insert(0) += 1;
            }
        }
    }
    CriticalHeaterReport {
        rooms,
        limiting_counts,
    }
}

/// Clusters, demand model and heatcurves in one pass.
pub fn run(
    series: &AlignedSeries,
    building: &BuildingModel,
    u_table: &URatioTable,
    params: &PipelineParams,
) -> Result<PipelineOutput, Error> {
    u_table.validate()?;
    let (features, clusters) = fit_clusters(series, params)?;
    let demand = fit_demand(series, &clusters, params.bin_width_k, params.min_samples)?;
    let ratios = u_ratios_anchored(u_table, params.ratio_anchor);
    let curves = derive_curves(building, &ratios, &demand, params)?;
    Ok(PipelineOutput {
        features,
        clusters,
        demand,
        ratios,
        curves,
    })
}

/// `cluster,t_out_C,room_id,q_mod_W`
pub fn room_loads_csv(loads: &[RoomLoads]) -> String {
    let mut out = String::from("cluster,t_out_C,room_id,q_mod_W\n");
    for l in loads {
        for r in &l.rooms {
            out.push_str(&format!("{},{},{},{}\n", l.cluster, l.t_out_c, r.room_id, r.q_mod_w));
        }
    }
    out
}

/// `cluster,t_out_C,room_id,heater_id,q_required_W,t_sup_required_C`
pub fn requirements_csv(requirements: &[BinRequirements]) -> String {
    let mut out = String::from("cluster,t_out_C,room_id,heater_id,q_required_W,t_sup_required_C\n");
    for b in requirements {
        for s in &b.states {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.cluster, b.t_out_c, s.room_id, s.heater_id, s.q_required_w, s.t_sup_required_c
            ));
        }
    }
    out
}

/// Interval quantile table with cluster assignment.
pub fn features_csv(features: &[IntervalFeatures], model: &ClusterModel) -> String {
    let mut out = String::from("interval,time,mean_kW,q90_kW,q10_kW,n,cluster\n");
    for f in features {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f.interval_index,
            crate::cluster::interval_label(f.interval_index),
            f.mean_kw,
            f.q90_kw,
            f.q10_kw,
            f.sample_count,
            model.assignment[f.interval_index]
        ));
    }
    out
}
