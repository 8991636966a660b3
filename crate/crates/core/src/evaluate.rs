//! Field evaluation: find the reference period whose outdoor temperature best
//! matches an experiment, then compare heater valve openings.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{DateTime, FixedOffset, Utc};
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{format_timestamp, parse_timestamp, GridSeries, STEP_S};
use crate::quantile::{mean, quantile_sorted, sort_floats};

pub const DEFAULT_MAX_MISSING_FRACTION: f64 = 0.2;
pub const SATURATION_PCT: f64 = 99.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("experiment window is empty")]
    EmptyExperiment,
    #[error("reference has {reference} intervals, shorter than the experiment's {experiment}")]
    ReferenceTooShort { reference: usize, experiment: usize },
    #[error("every reference offset exceeds the missing-data tolerance")]
    NoAdmissibleOffset,
    #[error("evaluation window is empty")]
    EmptyWindow,
    #[error("no heater has valve samples in the window")]
    NoValveData,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("valve opening {value} % of heater {heater:?} outside [0, 100]")]
    OpeningOutOfRange { heater: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMatch {
    pub ref_start: String,
    pub offset: usize,
    #[serde(rename = "rmse_K")]
    pub rmse_k: f64,
    pub length_intervals: usize,
    pub length_s: i64,
    pub valid_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Offsets with a larger share of missing pairs are skipped.
    pub max_missing_fraction: f64,
    /// Reference windows overlapping this range are skipped.
    pub exclude: Option<(DateTime<Utc>, DateTime<Utc>)>,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            max_missing_fraction: DEFAULT_MAX_MISSING_FRACTION,
            exclude: None,
        }
    }
}

pub fn match_window(experiment: &GridSeries, reference: &GridSeries) -> Result<WindowMatch, EvaluateError> {
    match_window_with(experiment, reference, &MatchOptions::default())
}

/// Exhaustive scan of every grid-aligned offset; the smallest RMSE wins and
/// ties go to the earliest start.
pub fn match_window_with(
    experiment: &GridSeries,
    reference: &GridSeries,
    options: &MatchOptions,
) -> Result<WindowMatch, EvaluateError> {
    let m = experiment.len();
    if m == 0 {
        return Err(EvaluateError::EmptyExperiment);
    }
    if reference.len() < m {
        return Err(EvaluateError::ReferenceTooShort {
            reference: reference.len(),
            experiment: m,
        });
    }
    let max_missing = (options.max_missing_fraction * m as f64).floor() as usize;
    let window = chrono::Duration::seconds(STEP_S * m as i64);
    let mut best: Option<(f64, usize, usize)> = None;
    for offset in 0..=reference.len() - m {
        if let Some((from, to)) = options.exclude {
            let start = reference.time_at(offset);
            if start < to && start + window > from {
                continue;
            }
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (e, r) in experiment.values.iter().zip(&reference.values[offset..offset + m]) {
            if let (Some(e), Some(r)) = (e, r) {
                sum += (e - r) * (e - r);
                pairs += 1;
            }
        }
        if pairs == 0 || m - pairs > max_missing {
            continue;
        }
        let rmse = (sum / pairs as f64).sqrt();
        if best.is_none_or(|(b, _, _)| rmse < b) {
            best = Some((rmse, offset, pairs));
        }
    }
    let (rmse_k, offset, valid_pairs) = best.ok_or(EvaluateError::NoAdmissibleOffset)?;
    Ok(WindowMatch {
        ref_start: format_timestamp(reference.time_at(offset)),
        offset,
        rmse_k,
        length_intervals: m,
        length_s: STEP_S * m as i64,
        valid_pairs,
    })
}

/// Valve openings per heater id.
pub type ValveSeries = BTreeMap<String, Vec<(DateTime<Utc>, f64)>>;

/// Reads `timestamp,heater_id,opening_pct` rows; samples end up in time order.
pub fn parse_valve_csv<R: Read>(reader: R, naive_offset: FixedOffset) -> Result<ValveSeries, EvaluateError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| EvaluateError::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.len() != 3 || &header[0] != "timestamp" || &header[1] != "heater_id" || &header[2] != "opening_pct" {
        return Err(EvaluateError::Parse {
            line: 1,
            message: "expected header `timestamp,heater_id,opening_pct`".into(),
        });
    }
    let mut out = ValveSeries::new();
    for record in rdr.records() {
        let record = record.map_err(|e| EvaluateError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let ts = parse_timestamp(&record[0], naive_offset).ok_or_else(|| EvaluateError::Parse {
            line,
            message: format!("invalid timestamp {:?}", &record[0]),
        })?;
        let value: f64 = record[2].parse().map_err(|_| EvaluateError::Parse {
            line,
            message: format!("non-numeric opening {:?}", &record[2]),
        })?;
        if !(0.0..=100.0).contains(&value) {
            return Err(EvaluateError::OpeningOutOfRange {
                heater: record[1].to_string(),
                value,
            });
        }
        out.entry(record[1].to_string()).or_default().push((ts, value));
    }
    for samples in out.values_mut() {
        samples.sort_by_key(|(t, _)| *t);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumberSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValveStats {
    pub window_start: String,
    pub window_end: String,
    #[serde(rename = "mean_opening_pct")]
    pub mean_opening_pct: BTreeMap<String, f64>,
    pub summary: FiveNumberSummary,
    /// Heaters whose mean lies beyond 1.5 IQR from the quartiles.
    pub outliers: Vec<String>,
    /// Heaters with a mean opening of at least 99 %.
    pub saturated: Vec<String>,
    /// Heaters without samples in the window.
    pub excluded: Vec<String>,
}

/// Mean opening per heater over `[from, to)` and the distribution of those means.
pub fn valve_stats(
    openings: &ValveSeries,
    from: DateTime<Utc>,
    to: DateTime<Utc>,
) -> Result<ValveStats, EvaluateError> {
    if to <= from {
        return Err(EvaluateError::EmptyWindow);
    }
    let mut means = BTreeMap::new();
    let mut excluded = Vec::new();
    for (heater, samples) in openings {
        let inside: Vec<f64> = samples
            .iter()
            .filter(|(t, _)| *t >= from && *t < to)
            .map(|(_, v)| *v)
            .collect();
        if let Some(v) = inside.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(EvaluateError::OpeningOutOfRange {
                heater: heater.clone(),
                value: *v,
            });
        }
        if inside.is_empty() {
            warn!("heater {heater}: no valve samples in window; excluded");
            excluded.push(heater.clone());
        } else {
            means.insert(heater.clone(), mean(&inside));
        }
    }
    if means.is_empty() {
        return Err(EvaluateError::NoValveData);
    }
    let mut sorted: Vec<f64> = means.values().copied().collect();
    sort_floats(&mut sorted);
    let summary = FiveNumberSummary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    };
    let lo = summary.q1 - 1.5 * summary.iqr();
    let hi = summary.q3 + 1.5 * summary.iqr();
    let outliers = means
        .iter()
        .filter(|(_, v)| **v < lo || **v > hi)
        .map(|(k, _)| k.clone())
        .collect();
    let saturated = means
        .iter()
        .filter(|(_, v)| **v >= SATURATION_PCT)
        .map(|(k, _)| k.clone())
        .collect();
    Ok(ValveStats {
        window_start: format_timestamp(from),
        window_end: format_timestamp(to),
        mean_opening_pct: means,
        summary,
        outliers,
        saturated,
        excluded,
    })
}
