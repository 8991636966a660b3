//! Run configuration: one JSON document, relative paths resolved against its
//! directory, command-line flags applied on top.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use heatcurve_core::building::BoundaryKind;
use heatcurve_core::heatcurve::{PostprocessOptions, DEFAULT_OUTPUT_RANGE_C, DEFAULT_SG_POLYORDER, DEFAULT_SG_WINDOW};
use heatcurve_core::ingest::{parse_timestamp, DayClock};
use heatcurve_core::lmtd::HeaterSplit;
use heatcurve_core::loads::{HallwayAssumption, HallwaySpreadRule, DEFAULT_HALLWAY_T_SUP_C};
use heatcurve_core::pipeline::PipelineParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub demand_csv: Option<PathBuf>,
    pub weather_csv: Option<PathBuf>,
    pub building_json: Option<PathBuf>,
    pub u_values_json: Option<PathBuf>,
    pub valve_csv: Option<PathBuf>,
    /// Weather series searched for the reference window; defaults to `weather_csv`.
    pub reference_weather_csv: Option<PathBuf>,
    pub output_dir: PathBuf,

    /// Overrides the building's own construction type for the U-value lookup.
    pub construction_type: Option<String>,
    pub n_cluster: usize,
    pub seed: u64,
    #[serde(rename = "bin_width_K")]
    pub bin_width_k: f64,
    pub min_samples: usize,
    #[serde(rename = "hallway_assumed_t_sup_C")]
    pub hallway_assumed_t_sup_c: f64,
    pub hallway_spread_rule: HallwaySpreadRule,
    pub exponent_n: f64,
    pub heater_split: HeaterSplit,
    pub ratio_anchor: BoundaryKind,
    #[serde(rename = "safety_offset_K")]
    pub safety_offset_k: f64,
    #[serde(rename = "output_range_C")]
    pub output_range_c: (f64, f64),
    pub sg_window: usize,
    pub sg_polyorder: usize,

    /// Local clock for interval-of-day and for timestamps without a zone.
    pub utc_offset_minutes: i32,
    pub clamp_negative_demand: bool,
    pub max_weather_gap_s: i64,
    pub elbow_k_max: usize,

    pub experiment_from: Option<String>,
    pub experiment_to: Option<String>,
    pub exclude_experiment_from_reference: bool,
    pub max_missing_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            demand_csv: None,
            weather_csv: None,
            building_json: None,
            u_values_json: None,
            valve_csv: None,
            reference_weather_csv: None,
            output_dir: PathBuf::from("out"),
            construction_type: None,
            n_cluster: 1,
            seed: 0,
            bin_width_k: 1.0,
            min_samples: 6,
            hallway_assumed_t_sup_c: DEFAULT_HALLWAY_T_SUP_C,
            hallway_spread_rule: HallwaySpreadRule::default(),
            exponent_n: heatcurve_core::building::DEFAULT_EXPONENT_N,
            heater_split: HeaterSplit::default(),
            ratio_anchor: BoundaryKind::Window,
            safety_offset_k: 0.0,
            output_range_c: DEFAULT_OUTPUT_RANGE_C,
            sg_window: DEFAULT_SG_WINDOW,
            sg_polyorder: DEFAULT_SG_POLYORDER,
            utc_offset_minutes: 0,
            clamp_negative_demand: false,
            max_weather_gap_s: 3 * 3600,
            elbow_k_max: 10,
            experiment_from: None,
            experiment_to: None,
            exclude_experiment_from_reference: false,
            max_missing_fraction: heatcurve_core::evaluate::DEFAULT_MAX_MISSING_FRACTION,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub demand: Option<PathBuf>,
    #[arg(long)]
    pub weather: Option<PathBuf>,
    #[arg(long)]
    pub building: Option<PathBuf>,
    #[arg(long)]
    pub u_values: Option<PathBuf>,
    #[arg(long)]
    pub valves: Option<PathBuf>,
    #[arg(long)]
    pub reference_weather: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub n_cluster: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(long)]
    pub min_samples: Option<usize>,
    #[arg(long)]
    pub safety_offset: Option<f64>,
    #[arg(long)]
    pub hallway_t_sup: Option<f64>,
    #[arg(long)]
    pub utc_offset_minutes: Option<i32>,
    /// Start of the experiment period (ISO-8601).
    #[arg(long)]
    pub exp_from: Option<String>,
    /// End of the experiment period, exclusive.
    #[arg(long)]
    pub exp_to: Option<String>,
}

impl RunConfig {
    /// Reads `path` if given; relative paths inside it are resolved against
    /// its directory. Flags are applied afterwards, relative to the working
    /// directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
                let mut c: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                c.resolve_paths(base);
                c
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        config.check()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut self.demand_csv);
        fix(&mut self.weather_csv);
        fix(&mut self.building_json);
        fix(&mut self.u_values_json);
        fix(&mut self.valve_csv);
        fix(&mut self.reference_weather_csv);
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    fn apply(&mut self, o: &Overrides) {
        let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                dst.clone_from(src);
            }
        };
        set(&mut self.demand_csv, &o.demand);
        set(&mut self.weather_csv, &o.weather);
        set(&mut self.building_json, &o.building);
        set(&mut self.u_values_json, &o.u_values);
        set(&mut self.valve_csv, &o.valves);
        set(&mut self.reference_weather_csv, &o.reference_weather);
        if let Some(v) = &o.output_dir {
            self.output_dir.clone_from(v);
        }
        if let Some(v) = o.n_cluster {
            self.n_cluster = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.bin_width {
            self.bin_width_k = v;
        }
        if let Some(v) = o.min_samples {
            self.min_samples = v;
        }
        if let Some(v) = o.safety_offset {
            self.safety_offset_k = v;
        }
        if let Some(v) = o.hallway_t_sup {
            self.hallway_assumed_t_sup_c = v;
        }
        if let Some(v) = o.utc_offset_minutes {
            self.utc_offset_minutes = v;
        }
        if o.exp_from.is_some() {
            self.experiment_from.clone_from(&o.exp_from);
        }
        if o.exp_to.is_some() {
            self.experiment_to.clone_from(&o.exp_to);
        }
    }

    /// Range checks that do not need any input file.
    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::config(m));
        if self.n_cluster == 0 || self.n_cluster > 144 {
            return bad(format!("n_cluster must be in 1..=144, got {}", self.n_cluster));
        }
        if !(self.bin_width_k.is_finite() && self.bin_width_k > 0.0) {
            return bad(format!("bin_width_K must be > 0, got {}", self.bin_width_k));
        }
        if self.min_samples == 0 {
            return bad("min_samples must be >= 1".into());
        }
        if !(1.0..=1.6).contains(&self.exponent_n) {
            return bad(format!("exponent_n must be in [1.0, 1.6], got {}", self.exponent_n));
        }
        if !(self.safety_offset_k.is_finite() && self.safety_offset_k >= 0.0) {
            return bad(format!("safety_offset_K must be >= 0, got {}", self.safety_offset_k));
        }
        let (lo, hi) = self.output_range_c;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("output_range_C must be an ordered pair, got ({lo}, {hi})"));
        }
        if self.sg_window.is_multiple_of(2) || self.sg_window <= self.sg_polyorder {
            return bad(format!(
                "sg_window must be odd and larger than sg_polyorder, got {} / {}",
                self.sg_window, self.sg_polyorder
            ));
        }
        if self.utc_offset_minutes % 10 != 0 || self.utc_offset_minutes.abs() > 18 * 60 {
            return bad(format!("utc_offset_minutes must be a multiple of 10 within ±18 h, got {}", self.utc_offset_minutes));
        }
        if self.max_weather_gap_s <= 0 {
            return bad("max_weather_gap_s must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return bad("max_missing_fraction must be in [0, 1]".into());
        }
        Ok(())
    }

    /// A configured input path that exists.
    pub fn input(&self, path: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        let p = path
            .as_ref()
            .ok_or_else(|| CliError::config(format!("no {what} configured")))?;
        if !p.is_file() {
            return Err(CliError::config(format!("{what} not found: {}", p.display())));
        }
        Ok(p.clone())
    }

    pub fn naive_offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).expect("offset checked")
    }

    pub fn clock(&self) -> DayClock {
        DayClock::new(self.utc_offset_minutes).expect("offset checked")
    }

    pub fn params(&self) -> PipelineParams {
        PipelineParams {
            n_cluster: self.n_cluster,
            seed: self.seed,
            bin_width_k: self.bin_width_k,
            min_samples: self.min_samples,
            hallway: HallwayAssumption {
                assumed_t_sup_c: self.hallway_assumed_t_sup_c,
                spread_rule: self.hallway_spread_rule,
            },
            heater_split: self.heater_split,
            safety_offset_k: self.safety_offset_k,
            postprocess: PostprocessOptions {
                output_range_c: self.output_range_c,
                window: self.sg_window,
                polyorder: self.sg_polyorder,
            },
            ratio_anchor: self.ratio_anchor,
        }
    }

    pub fn experiment_range(&self) -> Result<(DateTime<Utc>, DateTime<Utc>), CliError> {
        let parse = |v: &Option<String>, name: &str| -> Result<DateTime<Utc>, CliError> {
            let s = v
                .as_deref()
                .ok_or_else(|| CliError::config(format!("{name} is required for evaluation")))?;
            parse_timestamp(s, self.naive_offset())
                .ok_or_else(|| CliError::config(format!("{name}: invalid timestamp {s:?}")))
        };
        let from = parse(&self.experiment_from, "experiment_from")?;
        let to = parse(&self.experiment_to, "experiment_to")?;
        if to <= from {
            return Err(CliError::config("experiment_to must be after experiment_from".into()));
        }
        Ok((from, to))
    }
}
