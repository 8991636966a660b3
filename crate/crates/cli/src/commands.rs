//! Subcommand bodies. Each builds its artifacts in memory; nothing touches the
//! output directory until everything has been computed.

use std::fs::{self, File};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Serialize;

use heatcurve_core::building::{load_building_with, load_u_catalog, lookup_u_table, u_ratios_anchored, BuildingModel, LoadOptions, URatioTable};
use heatcurve_core::cluster::{elbow_scores, ClusterModel, IntervalFeatures};
use heatcurve_core::demand::{fit_demand, DemandModel};
use heatcurve_core::evaluate::{match_window_with, parse_valve_csv, valve_stats, MatchOptions, ValveStats, WindowMatch};
use heatcurve_core::heatcurve::Heatcurve;
use heatcurve_core::ingest::{
    align_with, format_timestamp, parse_series, resample_temperature, AlignOptions, AlignedSeries,
    AlignmentReport, ParseOptions, RawSeries, SeriesKind, STEP_S,
};
use heatcurve_core::pipeline::{
    derive_curves, features_csv, fit_clusters, requirements_csv, room_loads_csv, CurveSet,
};
use heatcurve_core::Error;

use crate::config::RunConfig;
use crate::output::Artifacts;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Cluster,
    Demand,
    Loads,
    Heatcurve,
}

fn read_text(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {what} {}: {e}", path.display())))
}

fn open(path: &Path, what: &str) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::config(format!("cannot open {what} {}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

fn read_series(cfg: &RunConfig, path: &Path, kind: SeriesKind, what: &str) -> Result<RawSeries, CliError> {
    let opts = ParseOptions {
        clamp_negative: cfg.clamp_negative_demand,
        naive_offset: cfg.naive_offset(),
    };
    parse_series(open(path, what)?, kind, &opts).map_err(|e| in_file(path)(e.into()))
}

pub struct Ingested {
    pub series: AlignedSeries,
    pub report: AlignmentReport,
}

pub fn ingest(cfg: &RunConfig) -> Result<Ingested, CliError> {
    let demand_path = cfg.input(&cfg.demand_csv, "demand CSV")?;
    let weather_path = cfg.input(&cfg.weather_csv, "weather CSV")?;
    let demand = read_series(cfg, &demand_path, SeriesKind::HeatPowerKw, "demand CSV")?;
    let weather = read_series(cfg, &weather_path, SeriesKind::OutdoorTempC, "weather CSV")?;
    let opts = AlignOptions {
        clock: cfg.clock(),
        max_weather_gap_s: cfg.max_weather_gap_s,
    };
    let (series, report) = align_with(&demand, &weather, &opts).map_err(Error::from)?;
    Ok(Ingested { series, report })
}

pub fn load_building_and_u(cfg: &RunConfig) -> Result<(BuildingModel, URatioTable), CliError> {
    let building_path = cfg.input(&cfg.building_json, "building JSON")?;
    let u_path = cfg.input(&cfg.u_values_json, "U-value JSON")?;
    let options = LoadOptions {
        default_exponent_n: cfg.exponent_n,
    };
    let building = load_building_with(&read_text(&building_path, "building JSON")?, &options)
        .map_err(|e| in_file(&building_path)(e.into()))?;
    let catalog = load_u_catalog(&read_text(&u_path, "U-value JSON")?).map_err(|e| in_file(&u_path)(e.into()))?;
    let key = cfg.construction_type.as_deref().unwrap_or(&building.construction_type);
    let table = *lookup_u_table(&catalog, key).map_err(|e| in_file(&u_path)(e.into()))?;
    Ok((building, table))
}

/// Everything computed up to some stage.
pub struct Run {
    pub ingested: Ingested,
    pub features: Option<Vec<IntervalFeatures>>,
    pub clusters: Option<ClusterModel>,
    pub elbow: Vec<(usize, f64)>,
    pub demand: Option<DemandModel>,
    pub building: Option<BuildingModel>,
    pub u_table: Option<URatioTable>,
    pub curves: Option<CurveSet>,
}

pub fn execute(cfg: &RunConfig, upto: Stage) -> Result<Run, CliError> {
    // Building inputs are checked before the expensive steps.
    let building = if upto >= Stage::Loads { Some(load_building_and_u(cfg)?) } else { None };
    let ingested = ingest(cfg)?;
    let mut run = Run {
        ingested,
        features: None,
        clusters: None,
        elbow: vec![],
        demand: None,
        building: None,
        u_table: None,
        curves: None,
    };
    if upto < Stage::Cluster {
        return Ok(run);
    }
    let params = cfg.params();
    let (features, clusters) = fit_clusters(&run.ingested.series, &params)?;
    run.elbow = elbow_scores(&features, cfg.elbow_k_max, cfg.seed).map_err(Error::from)?;
    if upto >= Stage::Demand {
        run.demand = Some(fit_demand(&run.ingested.series, &clusters, params.bin_width_k, params.min_samples).map_err(Error::from)?);
    }
    run.features = Some(features);
    run.clusters = Some(clusters);
    if let Some((b, u)) = building {
        u.validate().map_err(Error::from)?;
        let ratios = u_ratios_anchored(&u, params.ratio_anchor);
        let demand = run.demand.as_ref().expect("demand fitted");
        run.curves = Some(derive_curves(&b, &ratios, demand, &params)?);
        run.building = Some(b);
        run.u_table = Some(u);
    }
    Ok(run)
}

fn elbow_csv(scores: &[(usize, f64)]) -> String {
    let mut out = String::from("n_cluster,wcss\n");
    for (k, w) in scores {
        out.push_str(&format!("{k},{w}\n"));
    }
    out
}

fn curve_points_csv(c: &Heatcurve) -> String {
    // Unprocessed values, for plotting against the final curve.
    let mut out = String::from("cluster,t_out_C,t_sup_C,limiting_heater\n");
    for (p, v) in c.computed() {
        out.push_str(&format!("{},{},{},{}\n", c.cluster, p.t_out_c, v, p.limiting_heater.as_deref().unwrap_or("")));
    }
    out
}

#[derive(Serialize)]
struct RatioReport {
    anchor: String,
    u_values: URatioTable,
    relative_u: std::collections::BTreeMap<String, f64>,
}

pub fn artifacts(cfg: &RunConfig, run: &Run, upto: Stage) -> Artifacts {
    let mut a = Artifacts::default();
    a.add("aligned.csv", run.ingested.series.to_csv());
    a.add_json("alignment_report.json", &run.ingested.report);
    if upto < Stage::Cluster {
        return a;
    }
    let clusters = run.clusters.as_ref().expect("clustered");
    a.add("interval_features.csv", features_csv(run.features.as_deref().expect("features"), clusters));
    a.add("cluster_model.json", clusters.to_json() + "\n");
    a.add("elbow.csv", elbow_csv(&run.elbow));
    if upto < Stage::Demand {
        return a;
    }
    let demand = run.demand.as_ref().expect("demand");
    a.add("demand_model.json", demand.to_json() + "\n");
    a.add("demand_model.csv", demand.to_csv());
    if upto < Stage::Loads {
        return a;
    }
    let curves = run.curves.as_ref().expect("curves");
    let u = run.u_table.expect("u table");
    let ratios = u_ratios_anchored(&u, cfg.ratio_anchor);
    a.add_json(
        "u_ratios.json",
        &RatioReport {
            anchor: cfg.ratio_anchor.to_string(),
            u_values: u,
            relative_u: heatcurve_core::building::BoundaryKind::ALL
                .iter()
                .map(|k| (k.to_string(), ratios.relative_u(*k)))
                .collect(),
        },
    );
    a.add("room_loads.csv", room_loads_csv(&curves.room_loads));
    a.add("heater_requirements.csv", requirements_csv(&curves.requirements));
    a.add_json("hallway_capacities.json", &curves.hallway_capacities_w);
    if upto < Stage::Heatcurve {
        return a;
    }
    for (raw, c) in curves.raw_curves.iter().zip(&curves.curves) {
        a.add(format!("heatcurve_cluster{}.csv", c.cluster), c.to_csv());
        a.add(format!("automation_cluster{}.csv", c.cluster), c.to_automation_csv());
        a.add(format!("heatcurve_raw_cluster{}.csv", c.cluster), curve_points_csv(raw));
    }
    a.add_json("critical_heaters.json", &curves.critical);
    a.add_json("hallway_verification.json", &curves.hallway_checks);
    a.add_json("skipped_bins.json", &curves.skipped);
    a
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub experiment_start: String,
    pub experiment_end: String,
    pub window_match: WindowMatch,
    pub experiment: ValveStats,
    pub reference: ValveStats,
}

pub fn evaluate(cfg: &RunConfig) -> Result<(Evaluation, Artifacts), CliError> {
    let valve_path = cfg
        .valve_csv
        .as_ref()
        .ok_or_else(|| CliError::config("evaluation needs valve_csv (or --valves)".into()))?;
    let valve_path = cfg.input(&Some(valve_path.clone()), "valve CSV")?;
    let (from, to) = cfg.experiment_range()?;
    let weather_path = cfg.input(&cfg.weather_csv, "weather CSV")?;
    let reference_path = match &cfg.reference_weather_csv {
        Some(_) => cfg.input(&cfg.reference_weather_csv, "reference weather CSV")?,
        None => weather_path.clone(),
    };
    let valves = parse_valve_csv(open(&valve_path, "valve CSV")?, cfg.naive_offset()).map_err(|e| in_file(&valve_path)(e.into()))?;

    let experiment_weather = read_series(cfg, &weather_path, SeriesKind::OutdoorTempC, "weather CSV")?;
    let experiment = resample_temperature(&experiment_weather, cfg.max_weather_gap_s)
        .map_err(|e| in_file(&weather_path)(e.into()))?
        .slice_time(from, to);
    let reference_weather = read_series(cfg, &reference_path, SeriesKind::OutdoorTempC, "reference weather CSV")?;
    let reference = resample_temperature(&reference_weather, cfg.max_weather_gap_s)
        .map_err(|e| in_file(&reference_path)(e.into()))?;
    let options = MatchOptions {
        max_missing_fraction: cfg.max_missing_fraction,
        exclude: cfg.exclude_experiment_from_reference.then_some((from, to)),
    };
    let m = match_window_with(&experiment, &reference, &options).map_err(Error::from)?;
    let ref_from: DateTime<Utc> = reference.time_at(m.offset);
    let ref_to = ref_from + chrono::Duration::seconds(STEP_S * m.length_intervals as i64);
    let exp_stats = valve_stats(&valves, from, to).map_err(Error::from)?;
    let ref_stats = valve_stats(&valves, ref_from, ref_to).map_err(Error::from)?;

    let mut a = Artifacts::default();
    a.add_json("window_match.json", &m);
    let mut means = String::from("heater_id,experiment_mean_pct,reference_mean_pct\n");
    let ids: std::collections::BTreeSet<&String> =
        exp_stats.mean_opening_pct.keys().chain(ref_stats.mean_opening_pct.keys()).collect();
    let fmt = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for id in ids {
        means.push_str(&format!(
            "{id},{},{}\n",
            fmt(exp_stats.mean_opening_pct.get(id)),
            fmt(ref_stats.mean_opening_pct.get(id))
        ));
    }
    a.add("valve_means.csv", means);
    let evaluation = Evaluation {
        experiment_start: format_timestamp(from),
        experiment_end: format_timestamp(to),
        window_match: m,
        experiment: exp_stats,
        reference: ref_stats,
    };
    a.add_json(
        "valve_stats.json",
        &serde_json::json!({ "experiment": evaluation.experiment, "reference": evaluation.reference }),
    );
    Ok((evaluation, a))
}

#[derive(Serialize)]
struct ClusterSummary {
    cluster: usize,
    intervals: usize,
    computed_bins: usize,
    #[serde(rename = "t_out_range_C")]
    t_out_range_c: Option<(f64, f64)>,
    #[serde(rename = "setpoint_min_C")]
    setpoint_min_c: f64,
    #[serde(rename = "setpoint_max_C")]
    setpoint_max_c: f64,
    hallway_assumption_holds: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    building_id: &'a str,
    construction_type: &'a str,
    rooms: usize,
    heaters: usize,
    aligned_intervals: usize,
    days: usize,
    n_cluster: usize,
    clusters: Vec<ClusterSummary>,
    limiting_heaters: &'a std::collections::BTreeMap<String, usize>,
    skipped_bins: usize,
    evaluation: Option<&'a Evaluation>,
}

/// Heatcurve artifacts plus a run summary, with the evaluation when valve
/// data is configured.
pub fn report(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let run = execute(cfg, Stage::Heatcurve)?;
    let mut a = artifacts(cfg, &run, Stage::Heatcurve);
    let evaluation = if cfg.valve_csv.is_some() {
        let (e, ea) = evaluate(cfg)?;
        for name in ea.names() {
            a.add(name, ea.get(name).expect("named artifact"));
        }
        Some(e)
    } else {
        None
    };
    let b = run.building.as_ref().expect("building");
    let curves = run.curves.as_ref().expect("curves");
    let clusters = run.clusters.as_ref().expect("clusters");
    let sizes = clusters.cluster_sizes();
    let summary = Summary {
        building_id: &b.building_id,
        construction_type: &b.construction_type,
        rooms: b.rooms.len(),
        heaters: b.heater_count(),
        aligned_intervals: run.ingested.series.len(),
        days: run.ingested.series.day_count(),
        n_cluster: clusters.n_cluster,
        clusters: curves
            .curves
            .iter()
            .zip(&curves.raw_curves)
            .zip(&curves.hallway_checks)
            .map(|((c, raw), check)| {
                let computed: Vec<f64> = raw.computed().map(|(p, _)| p.t_out_c).collect();
                let sp = c.points.iter().map(|p| p.t_sup_c);
                ClusterSummary {
                    cluster: c.cluster,
                    intervals: sizes[c.cluster],
                    computed_bins: computed.len(),
                    t_out_range_c: computed.first().zip(computed.last()).map(|(a, b)| (*a, *b)),
                    setpoint_min_c: sp.clone().fold(f64::INFINITY, f64::min),
                    setpoint_max_c: sp.fold(f64::NEG_INFINITY, f64::max),
                    hallway_assumption_holds: check.passed,
                }
            })
            .collect(),
        limiting_heaters: &curves.critical.limiting_counts,
        skipped_bins: curves.skipped.len(),
        evaluation: evaluation.as_ref(),
    };
    a.add_json("summary.json", &summary);
    Ok(a)
}
