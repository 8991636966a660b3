//! Meter and weather time series: CSV parsing and alignment onto a shared
//! 10-minute grid.
//!
//! Interval `i` of an aligned series covers `[start + 600·i, start + 600·(i+1))`.
//! Demand is the mean of the power samples falling in the interval; outdoor
//! temperature is linearly interpolated at the interval start. Intervals
//! without a demand sample stay missing, they are never imputed.

use std::io::Read;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STEP_S: i64 = 600;
pub const INTERVALS_PER_DAY: usize = 144;
const STEP_MS: i64 = STEP_S * 1000;
const DAY_S: i64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("empty input: no data rows")]
    EmptyInput,
    #[error("line {line}: expected header `timestamp,value`, found `{found}`")]
    Header { line: u64, found: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: negative heat power {value} (use clamp-negative to zero it)")]
    NegativeValue { line: u64, value: f64 },
    #[error("series do not overlap on the 10-minute grid")]
    NoOverlap,
    #[error("UTC offset of {0} min is not a multiple of 10 minutes")]
    InvalidOffset(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[serde(rename = "heat_power_kW")]
    HeatPowerKw,
    #[serde(rename = "outdoor_temp_C")]
    OutdoorTempC,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub kind: SeriesKind,
    /// Strictly increasing timestamps.
    pub points: Vec<(DateTime<Utc>, f64)>,
    pub duplicates_collapsed: usize,
    pub negatives_clamped: usize,
}

impl RawSeries {
    pub fn new(kind: SeriesKind, mut points: Vec<(DateTime<Utc>, f64)>) -> Self {
        let duplicates = sort_and_dedup(&mut points);
        Self {
            kind,
            points,
            duplicates_collapsed: duplicates,
            negatives_clamped: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,value\n");
        for (t, v) in &self.points {
            out.push_str(&format!("{},{}\n", format_timestamp(*t), v));
        }
        out
    }
}

/// Stable sort by timestamp, then keep the last occurrence of each timestamp.
fn sort_and_dedup(points: &mut Vec<(DateTime<Utc>, f64)>) -> usize {
    points.sort_by_key(|(t, _)| *t);
    let before = points.len();
    let mut out: Vec<(DateTime<Utc>, f64)> = Vec::with_capacity(before);
    for p in points.drain(..) {
        match out.last_mut() {
            Some(last) if last.0 == p.0 => *last = p,
            _ => out.push(p),
        }
    }
    *points = out;
    before - points.len()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Zero negative heat-power readings instead of rejecting them.
    pub clamp_negative: bool,
    /// Offset used for timestamps that carry no zone designator.
    pub naive_offset: FixedOffset,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            clamp_negative: false,
            naive_offset: FixedOffset::east_opt(0).expect("zero offset"),
        }
    }
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
}

/// Parses an ISO-8601 timestamp. Values without a zone are read in `naive_offset`.
pub fn parse_timestamp(s: &str, naive_offset: FixedOffset) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    let naive = NAIVE
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })?;
    naive_offset
        .from_local_datetime(&naive)
        .single()
        .map(|t| t.with_timezone(&Utc))
}

/// Reads a `timestamp,value` CSV. Duplicated timestamps keep the last row.
pub fn parse_series<R: Read>(
    reader: R,
    kind: SeriesKind,
    options: &ParseOptions,
) -> Result<RawSeries, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::EmptyInput);
    }
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "value" {
        return Err(IngestError::Header {
            line: 1,
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut points = Vec::new();
    let mut clamped = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let ts = parse_timestamp(&record[0], options.naive_offset).ok_or_else(|| {
            IngestError::Parse {
                line,
                message: format!("invalid timestamp {:?}", &record[0]),
            }
        })?;
        let mut value: f64 = record[1].parse().map_err(|_| IngestError::Parse {
            line,
            message: format!("non-numeric value {:?}", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(IngestError::Parse {
                line,
                message: format!("non-finite value {:?}", &record[1]),
            });
        }
        if kind == SeriesKind::HeatPowerKw && value < 0.0 {
            if options.clamp_negative {
                value = 0.0;
                clamped += 1;
            } else {
                return Err(IngestError::NegativeValue { line, value });
            }
        }
        points.push((ts, value));
    }
    if points.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut series = RawSeries::new(kind, points);
    series.negatives_clamped = clamped;
    Ok(series)
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> IngestError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    IngestError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Maps instants to the 144 ten-minute intervals of a civil day at a fixed
/// UTC offset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayClock {
    pub utc_offset_minutes: i32,
}

impl DayClock {
    pub fn new(utc_offset_minutes: i32) -> Result<Self, IngestError> {
        if utc_offset_minutes % 10 != 0 || utc_offset_minutes.abs() >= 24 * 60 {
            return Err(IngestError::InvalidOffset(utc_offset_minutes));
        }
        Ok(Self { utc_offset_minutes })
    }

    pub fn interval_of_day(&self, t: DateTime<Utc>) -> usize {
        let local = t.timestamp() + i64::from(self.utc_offset_minutes) * 60;
        (local.rem_euclid(DAY_S) / STEP_S) as usize
    }

    /// Civil day number (days since 1970-01-01 local).
    pub fn day_number(&self, t: DateTime<Utc>) -> i64 {
        let local = t.timestamp() + i64::from(self.utc_offset_minutes) * 60;
        local.div_euclid(DAY_S)
    }
}

/// A single quantity on the 10-minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub start: DateTime<Utc>,
    pub values: Vec<Option<f64>>,
}

impl GridSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::seconds(STEP_S * index as i64)
    }

    /// Sub-series covering `[from, to)`, snapped to the grid.
    pub fn slice_time(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> GridSeries {
        let idx = |t: DateTime<Utc>| -> usize {
            let ms = (t - self.start).num_milliseconds();
            if ms <= 0 {
                0
            } else {
                (ms.div_euclid(STEP_MS) + i64::from(ms.rem_euclid(STEP_MS) != 0)) as usize
            }
        };
        let lo = idx(from).min(self.len());
        let hi = idx(to).clamp(lo, self.len());
        GridSeries {
            start: self.time_at(lo),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries {
    /// Aligned to a 10-minute boundary.
    pub start: DateTime<Utc>,
    pub clock: DayClock,
    pub demand_kw: Vec<Option<f64>>,
    pub t_out_c: Vec<Option<f64>>,
}

impl AlignedSeries {
    pub fn len(&self) -> usize {
        self.demand_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand_kw.is_empty()
    }

    pub fn time_at(&self, index: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::seconds(STEP_S * index as i64)
    }

    pub fn interval_of_day(&self, index: usize) -> usize {
        self.clock.interval_of_day(self.time_at(index))
    }

    pub fn t_out_grid(&self) -> GridSeries {
        GridSeries {
            start: self.start,
            values: self.t_out_c.clone(),
        }
    }

    /// Number of distinct civil days touched by the series.
    pub fn day_count(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        let first = self.clock.day_number(self.time_at(0));
        let last = self.clock.day_number(self.time_at(self.len() - 1));
        (last - first + 1) as usize
    }

    /// Raw series of the present values, one point per interval start.
    pub fn to_raw(&self) -> (RawSeries, RawSeries) {
        let collect = |values: &[Option<f64>]| -> Vec<(DateTime<Utc>, f64)> {
            values
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| (self.time_at(i), v)))
                .collect()
        };
        (
            RawSeries::new(SeriesKind::HeatPowerKw, collect(&self.demand_kw)),
            RawSeries::new(SeriesKind::OutdoorTempC, collect(&self.t_out_c)),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,demand_kW,t_out_C\n");
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                format_timestamp(self.time_at(i)),
                fmt(self.demand_kw[i]),
                fmt(self.t_out_c[i])
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub clock: DayClock,
    /// Temperature is left missing where the bracketing weather samples are
    /// further apart than this.
    pub max_weather_gap_s: i64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            clock: DayClock::default(),
            max_weather_gap_s: 3 * 3600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub start: Option<String>,
    pub end: Option<String>,
    pub intervals: usize,
    pub missing_demand_intervals: usize,
    pub missing_t_out_intervals: usize,
    pub trimmed_edge_intervals: usize,
    pub demand_samples_used: usize,
    pub demand_samples_outside: usize,
    pub weather_samples_outside: usize,
    pub demand_duplicates_collapsed: usize,
    pub weather_duplicates_collapsed: usize,
    pub negatives_clamped: usize,
}

fn ms(t: DateTime<Utc>) -> i64 {
    t.timestamp_millis()
}

fn from_ms(v: i64) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(v).expect("timestamp in range")
}

/// Linear interpolation of `points` at `t_ms`; `None` outside the range or
/// across a gap wider than `max_gap_ms`. `cursor` advances monotonically.
fn interpolate_at(
    points: &[(DateTime<Utc>, f64)],
    cursor: &mut usize,
    t_ms: i64,
    max_gap_ms: i64,
) -> Option<f64> {
    while *cursor + 1 < points.len() && ms(points[*cursor + 1].0) <= t_ms {
        *cursor += 1;
    }
    let (t0, v0) = points[*cursor];
    let t0 = ms(t0);
    if t0 == t_ms {
        return Some(v0);
    }
    if t0 > t_ms || *cursor + 1 >= points.len() {
        return None;
    }
    let (t1, v1) = points[*cursor + 1];
    let t1 = ms(t1);
    if t1 - t0 > max_gap_ms {
        return None;
    }
    Some(v0 + (v1 - v0) * ((t_ms - t0) as f64 / (t1 - t0) as f64))
}

pub fn align(demand: &RawSeries, weather: &RawSeries) -> Result<AlignedSeries, IngestError> {
    align_with(demand, weather, &AlignOptions::default()).map(|(s, _)| s)
}

/// Resamples both series over their overlap. Leading and trailing intervals
/// lacking either quantity are trimmed so the grid starts and ends on
/// observed data.
pub fn align_with(
    demand: &RawSeries,
    weather: &RawSeries,
    options: &AlignOptions,
) -> Result<(AlignedSeries, AlignmentReport), IngestError> {
    if demand.is_empty() || weather.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let d = &demand.points;
    let w = &weather.points;
    let overlap_start = ms(d[0].0).max(ms(w[0].0));
    let overlap_end = ms(d[d.len() - 1].0).min(ms(w[w.len() - 1].0));
    let start = overlap_start.div_euclid(STEP_MS) * STEP_MS
        + if overlap_start.rem_euclid(STEP_MS) == 0 { 0 } else { STEP_MS };
    if start > overlap_end {
        return Err(IngestError::NoOverlap);
    }
    let n = ((overlap_end - start) / STEP_MS + 1) as usize;
    let grid_end = start + STEP_MS * n as i64;

    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (t, v) in d {
        let t = ms(*t);
        if t < start || t >= grid_end {
            continue;
        }
        let i = ((t - start) / STEP_MS) as usize;
        sums[i] += v;
        counts[i] += 1;
    }
    let mut demand_kw: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();

    let mut cursor = 0;
    let mut t_out_c: Vec<Option<f64>> = (0..n)
        .map(|i| {
            interpolate_at(
                w,
                &mut cursor,
                start + STEP_MS * i as i64,
                options.max_weather_gap_s * 1000,
            )
        })
        .collect();
    let weather_outside = w
        .iter()
        .filter(|(t, _)| ms(*t) < overlap_start || ms(*t) > overlap_end)
        .count();

    let complete = |i: usize| demand_kw[i].is_some() && t_out_c[i].is_some();
    let Some(first) = (0..n).find(|&i| complete(i)) else {
        return Err(IngestError::NoOverlap);
    };
    let last = (0..n).rev().find(|&i| complete(i)).expect("first exists");
    let trimmed = n - (last - first + 1);
    demand_kw = demand_kw[first..=last].to_vec();
    t_out_c = t_out_c[first..=last].to_vec();
    let used: usize = counts[first..=last].iter().sum();

    let series = AlignedSeries {
        start: from_ms(start + STEP_MS * first as i64),
        clock: options.clock,
        demand_kw,
        t_out_c,
    };
    let report = AlignmentReport {
        start: Some(format_timestamp(series.start)),
        end: Some(format_timestamp(series.time_at(series.len() - 1))),
        intervals: series.len(),
        missing_demand_intervals: series.demand_kw.iter().filter(|v| v.is_none()).count(),
        missing_t_out_intervals: series.t_out_c.iter().filter(|v| v.is_none()).count(),
        trimmed_edge_intervals: trimmed,
        demand_samples_used: used,
        demand_samples_outside: d.len() - used,
        weather_samples_outside: weather_outside,
        demand_duplicates_collapsed: demand.duplicates_collapsed,
        weather_duplicates_collapsed: weather.duplicates_collapsed,
        negatives_clamped: demand.negatives_clamped,
    };
    Ok((series, report))
}

/// Resamples a temperature series alone onto the grid spanning its range.
pub fn resample_temperature(weather: &RawSeries, max_gap_s: i64) -> Result<GridSeries, IngestError> {
    if weather.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let w = &weather.points;
    let first = ms(w[0].0);
    let last = ms(w[w.len() - 1].0);
    let start = first.div_euclid(STEP_MS) * STEP_MS
        + if first.rem_euclid(STEP_MS) == 0 { 0 } else { STEP_MS };
    if start > last {
        return Err(IngestError::NoOverlap);
    }
    let n = ((last - start) / STEP_MS + 1) as usize;
    let mut cursor = 0;
    let values = (0..n)
        .map(|i| interpolate_at(w, &mut cursor, start + STEP_MS * i as i64, max_gap_s * 1000))
        .collect();
    Ok(GridSeries {
        start: from_ms(start),
        values,
    })
}
