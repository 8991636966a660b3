//! Radiator thermodynamics based on the logarithmic mean temperature
//! difference between heater water and room air.
//!
//! Heater output follows `Q = k · LMTD^n`. The product `k` never needs to be
//! known: part-load output is expressed relative to the nominal rating, with
//! the supply/return spread held at its nominal value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{BuildingModel, Heater};
use crate::loads::RoomLoads;

/// Spread below which supply and return are treated as equal.
const SPREAD_EPS_K: f64 = 1e-9;
/// Above `LARGE_LMTD_FACTOR · ΔT` the series limit replaces the exponential.
const LARGE_LMTD_FACTOR: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmtdError {
    #[error("LMTD domain error: supply {t_sup} / return {t_ret} must exceed room temperature {t_in}")]
    Domain { t_sup: f64, t_ret: f64, t_in: f64 },
    #[error("room {0:?} has a heat load but no heaters")]
    RoomWithoutHeaters(String),
}

/// Logarithmic mean temperature difference in K.
pub fn lmtd(t_sup_c: f64, t_ret_c: f64, t_in_c: f64) -> Result<f64, LmtdError> {
    let domain = || LmtdError::Domain {
        t_sup: t_sup_c,
        t_ret: t_ret_c,
        t_in: t_in_c,
    };
    let spread = t_sup_c - t_ret_c;
    if t_ret_c <= t_in_c || t_sup_c <= t_in_c || spread < -SPREAD_EPS_K {
        return Err(domain());
    }
    if spread.abs() < SPREAD_EPS_K {
        return Ok(0.5 * (t_sup_c + t_ret_c) - t_in_c);
    }
    Ok(spread / ((t_sup_c - t_in_c) / (t_ret_c - t_in_c)).ln())
}

/// Nominal LMTD of a heater at room temperature `t_in_c`.
pub fn nominal_lmtd(heater: &Heater, t_in_c: f64) -> Result<f64, LmtdError> {
    lmtd(heater.t_sup_nom_c, heater.t_ret_nom_c, t_in_c)
}

/// LMTD needed to deliver `q_mod_w` from a heater rated `q_nom_w` at
/// `lmtd_nom_k`. Loads above nominal are computed by the same relation.
pub fn required_lmtd(q_mod_w: f64, q_nom_w: f64, exponent_n: f64, lmtd_nom_k: f64) -> f64 {
    if q_mod_w == q_nom_w {
        return lmtd_nom_k;
    }
    if q_mod_w <= 0.0 {
        return 0.0;
    }
    (q_mod_w / q_nom_w).powf(1.0 / exponent_n) * lmtd_nom_k
}

/// Supply temperature at which a heater with fixed spread `delta_t_k`
/// reaches `lmtd_required_k`.
///
/// Evaluated as `t_in + ΔT / (1 - exp(-ΔT/LMTD))`, algebraically identical to
/// `(t_in - x(ΔT + t_in)) / (1 - x)` with `x = exp(ΔT/LMTD)` but free of
/// overflow for small LMTD and of cancellation for large LMTD.
pub fn invert_supply_temp(lmtd_required_k: f64, delta_t_k: f64, t_in_c: f64) -> f64 {
    debug_assert!(delta_t_k > 0.0);
    if lmtd_required_k <= 0.0 {
        return t_in_c;
    }
    if lmtd_required_k >= LARGE_LMTD_FACTOR * delta_t_k {
        return t_in_c + lmtd_required_k + 0.5 * delta_t_k;
    }
    let y = delta_t_k / lmtd_required_k;
    t_in_c + delta_t_k / -(-y).exp_m1()
}

/// How a room's load is shared between its heaters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaterSplit {
    /// Same share for every heater in the room.
    #[default]
    Equal,
    /// Share proportional to nominal output.
    CapacityProportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterState {
    pub heater_id: String,
    pub room_id: String,
    #[serde(rename = "t_in_C")]
    pub t_in_c: f64,
    #[serde(rename = "q_nom_W")]
    pub q_nom_w: f64,
    #[serde(rename = "lmtd_nom_K")]
    pub lmtd_nom_k: f64,
    #[serde(rename = "delta_t_K")]
    pub delta_t_k: f64,
    #[serde(rename = "q_required_W")]
    pub q_required_w: f64,
    #[serde(rename = "lmtd_required_K")]
    pub lmtd_required_k: f64,
    #[serde(rename = "t_sup_required_C")]
    pub t_sup_required_c: f64,
}

impl HeaterState {
    pub fn evaluate(
        heater: &Heater,
        room_id: &str,
        t_in_c: f64,
        q_required_w: f64,
    ) -> Result<Self, LmtdError> {
        let lmtd_nom_k = nominal_lmtd(heater, t_in_c)?;
        let delta_t_k = heater.delta_t_nom_k();
        let lmtd_required_k =
            required_lmtd(q_required_w, heater.q_nom_w, heater.exponent_n, lmtd_nom_k);
        let t_sup_required_c = invert_supply_temp(lmtd_required_k, delta_t_k, t_in_c);
        Ok(Self {
            heater_id: heater.id.clone(),
            room_id: room_id.to_string(),
            t_in_c,
            q_nom_w: heater.q_nom_w,
            lmtd_nom_k,
            delta_t_k,
            q_required_w,
            lmtd_required_k,
            t_sup_required_c,
        })
    }

    pub fn is_overloaded(&self) -> bool {
        self.q_required_w > self.q_nom_w
    }
}

/// Per-heater requirements for every non-hallway heater in the building.
///
/// Hallway heaters are excluded: their supply temperature is the fixed
/// hallway assumption, not a result.
pub fn heater_requirements(
    loads: &RoomLoads,
    building: &BuildingModel,
    split: HeaterSplit,
) -> Result<Vec<HeaterState>, LmtdError> {
    let mut states = Vec::with_capacity(building.heater_count());
    for room in building.rooms.iter().filter(|r| !r.is_hallway()) {
        let q_room = loads.room_load(&room.id).unwrap_or(0.0);
        if room.heaters.is_empty() {
            if q_room > 0.0 {
                return Err(LmtdError::RoomWithoutHeaters(room.id.clone()));
            }
            continue;
        }
        let total_nom: f64 = room.heaters.iter().map(|h| h.q_nom_w).sum();
        let count = room.heaters.len() as f64;
        for heater in &room.heaters {
            let share = match split {
                HeaterSplit::Equal => q_room / count,
                HeaterSplit::CapacityProportional => q_room * heater.q_nom_w / total_nom,
            };
            states.push(HeaterState::evaluate(heater, &room.id, room.t_in_c, share)?);
        }
    }
    Ok(states)
}
