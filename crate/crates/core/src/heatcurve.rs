//! Building heatcurves: the highest per-heater supply requirement per
//! (cluster, outdoor-temperature bin), followed by gap filling, smoothing,
//! a safety offset and a physical floor.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::bin_index;
use crate::lmtd::HeaterState;
use crate::smoothing::{savgol_smooth, SmoothingError};

pub const DEFAULT_OUTPUT_RANGE_C: (f64, f64) = (-15.0, 20.0);
pub const DEFAULT_SG_WINDOW: usize = 7;
pub const DEFAULT_SG_POLYORDER: usize = 2;
/// Smoothed points closer than this to their computed value keep `Computed`.
const SMOOTHING_EPS_K: f64 = 1e-9;
/// Minimum margin of the final setpoint above the warmest heated room.
const FLOOR_MARGIN_K: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatcurveError {
    #[error("heatcurve for cluster {0} has no computed points")]
    NoComputedPoints(usize),
    #[error("output range ({0}, {1}) is empty")]
    InvalidRange(f64, f64),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Computed,
    /// Held from the nearest computed bin on the cold side.
    FrontFilled,
    /// Held from the coldest computed bin.
    BackFilled,
    Smoothed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Computed => "computed",
            Provenance::FrontFilled => "front_filled",
            Provenance::BackFilled => "back_filled",
            Provenance::Smoothed => "smoothed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bin: i64,
    #[serde(rename = "t_out_C")]
    pub t_out_c: f64,
    #[serde(rename = "t_sup_C")]
    pub t_sup_c: f64,
    pub provenance: Provenance,
    /// Unprocessed aggregate for bins that had demand data.
    #[serde(rename = "computed_t_sup_C")]
    pub computed_t_sup_c: Option<f64>,
    pub limiting_heater: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatcurve {
    pub cluster: usize,
    #[serde(rename = "bin_width_K")]
    pub bin_width_k: f64,
    /// Ascending in outdoor temperature.
    pub points: Vec<CurvePoint>,
    #[serde(rename = "safety_offset_K")]
    pub safety_offset_k: f64,
    /// Highest indoor set-point among heated rooms.
    #[serde(rename = "max_t_in_C")]
    pub max_t_in_c: f64,
    pub smoothed: bool,
}

/// Highest required supply temperature and its heater; ties go to the
/// lexicographically smallest heater id.
pub fn aggregate(states: &[HeaterState]) -> Option<(f64, &str)> {
    let mut best: Option<&HeaterState> = None;
    for s in states {
        best = match best {
            None => Some(s),
            Some(b) if s.t_sup_required_c > b.t_sup_required_c => Some(s),
            Some(b) if s.t_sup_required_c == b.t_sup_required_c && s.heater_id < b.heater_id => Some(s),
            keep => keep,
        };
    }
    best.map(|s| (s.t_sup_required_c, s.heater_id.as_str()))
}

impl Heatcurve {
    /// Curve of computed points only, as produced by aggregation.
    pub fn from_computed(
        cluster: usize,
        bin_width_k: f64,
        max_t_in_c: f64,
        safety_offset_k: f64,
        mut computed: Vec<(i64, f64, String)>,
    ) -> Self {
        computed.sort_by_key(|(bin, _, _)| *bin);
        let points = computed
            .into_iter()
            .map(|(bin, t_sup, heater)| CurvePoint {
                bin,
                t_out_c: bin as f64 * bin_width_k,
                t_sup_c: t_sup,
                provenance: Provenance::Computed,
                computed_t_sup_c: Some(t_sup),
                limiting_heater: Some(heater),
            })
            .collect();
        Self {
            cluster,
            bin_width_k,
            points,
            safety_offset_k,
            max_t_in_c,
            smoothed: false,
        }
    }

    pub fn computed(&self) -> impl Iterator<Item = (&CurvePoint, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.computed_t_sup_c.map(|v| (p, v)))
    }

    /// Setpoint of the bin containing `t_out_c`.
    pub fn setpoint(&self, t_out_c: f64) -> Option<f64> {
        let bin = bin_index(t_out_c, self.bin_width_k);
        self.points
            .binary_search_by_key(&bin, |p| p.bin)
            .ok()
            .map(|i| self.points[i].t_sup_c)
    }

    /// `cluster,t_out_C,t_sup_C,provenance,limiting_heater`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster,t_out_C,t_sup_C,provenance,limiting_heater\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.cluster,
                p.t_out_c,
                p.t_sup_c,
                p.provenance.as_str(),
                p.limiting_heater.as_deref().unwrap_or("")
            ));
        }
        out
    }

    /// Flat `t_out_C,t_sup_C` table for building automation.
    pub fn to_automation_csv(&self) -> String {
        let mut out = String::from("t_out_C,t_sup_C\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.t_out_c, p.t_sup_c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallwayVerification {
    pub cluster: usize,
    pub passed: bool,
    #[serde(rename = "assumed_t_sup_C")]
    pub assumed_t_sup_c: f64,
    #[serde(rename = "curve_min_C")]
    pub curve_min_c: Option<f64>,
    /// Outdoor temperatures of computed bins below the assumption.
    #[serde(rename = "violating_t_out_C")]
    pub violating_t_out_c: Vec<f64>,
}

/// Passes when the assumed hallway supply temperature does not exceed any
/// computed setpoint, i.e. the hallway assumption is never limiting.
pub fn verify_hallway_assumption(curve: &Heatcurve, assumed_t_sup_c: f64) -> HallwayVerification {
    let curve_min_c = curve.computed().map(|(_, v)| v).reduce(f64::min);
    let violating: Vec<f64> = curve
        .computed()
        .filter(|(_, v)| *v < assumed_t_sup_c)
        .map(|(p, _)| p.t_out_c)
        .collect();
    HallwayVerification {
        cluster: curve.cluster,
        passed: violating.is_empty(),
        assumed_t_sup_c,
        curve_min_c,
        violating_t_out_c: violating,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessOptions {
    #[serde(rename = "output_range_C")]
    pub output_range_c: (f64, f64),
    pub window: usize,
    pub polyorder: usize,
}

impl Default for PostprocessOptions {
    fn default() -> Self {
        Self {
            output_range_c: DEFAULT_OUTPUT_RANGE_C,
            window: DEFAULT_SG_WINDOW,
            polyorder: DEFAULT_SG_POLYORDER,
        }
    }
}

/// Fills, smooths and offsets a curve. Only the computed values are read,
/// so processing an already processed curve reproduces it.
pub fn postprocess(curve: &Heatcurve, options: &PostprocessOptions) -> Result<Heatcurve, HeatcurveError> {
    let (lo, hi) = options.output_range_c;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(HeatcurveError::InvalidRange(lo, hi));
    }
    if options.window.is_multiple_of(2) {
        return Err(SmoothingError::EvenWindow(options.window).into());
    }
    if options.window <= options.polyorder {
        return Err(SmoothingError::PolyorderTooLarge {
            window: options.window,
            polyorder: options.polyorder,
        }
        .into());
    }
    let computed: Vec<&CurvePoint> = curve.points.iter().filter(|p| p.computed_t_sup_c.is_some()).collect();
    let (Some(first), Some(last)) = (computed.first(), computed.last()) else {
        return Err(HeatcurveError::NoComputedPoints(curve.cluster));
    };
    let bw = curve.bin_width_k;
    let lo_bin = bin_index(lo, bw).min(first.bin);
    let hi_bin = bin_index(hi, bw).max(last.bin);

    let mut points = Vec::with_capacity((hi_bin - lo_bin + 1) as usize);
    let mut next = 0;
    let mut cold_side: Option<f64> = None;
    for bin in lo_bin..=hi_bin {
        if next < computed.len() && computed[next].bin == bin {
            let p = computed[next];
            let v = p.computed_t_sup_c.expect("computed");
            points.push(CurvePoint {
                bin,
                t_out_c: bin as f64 * bw,
                t_sup_c: v,
                provenance: Provenance::Computed,
                computed_t_sup_c: Some(v),
                limiting_heater: p.limiting_heater.clone(),
            });
            cold_side = Some(v);
            next += 1;
            continue;
        }
        let (value, provenance) = match cold_side {
            None => (first.computed_t_sup_c.expect("computed"), Provenance::BackFilled),
            Some(v) => (v, Provenance::FrontFilled),
        };
        points.push(CurvePoint {
            bin,
            t_out_c: bin as f64 * bw,
            t_sup_c: value,
            provenance,
            computed_t_sup_c: None,
            limiting_heater: None,
        });
    }

    let mut smoothed = false;
    if computed.len() < options.window {
        warn!(
            "cluster {}: {} computed points < window {}; smoothing skipped",
            curve.cluster,
            computed.len(),
            options.window
        );
    } else {
        let values: Vec<f64> = points.iter().map(|p| p.t_sup_c).collect();
        let s = savgol_smooth(&values, options.window, options.polyorder)?;
        for (p, v) in points.iter_mut().zip(s) {
            if p.provenance == Provenance::Computed && (v - p.t_sup_c).abs() > SMOOTHING_EPS_K {
                p.provenance = Provenance::Smoothed;
            }
            p.t_sup_c = v;
        }
        smoothed = true;
    }

    let floor = curve.max_t_in_c + FLOOR_MARGIN_K;
    for p in &mut points {
        p.t_sup_c = (p.t_sup_c + curve.safety_offset_k).max(floor);
    }
    Ok(Heatcurve {
        points,
        smoothed,
        ..curve.clone()
    })
}
