//! Allocation of the building heat demand to rooms.
//!
//! Each room loses heat through its envelope as `Σ_k A_k · U_k · (t_in - t_out)`.
//! Only the ratios between the U-values of the four boundary kinds are known,
//! so the absolute scale is fixed by requiring the room loads to add up to
//! the modelled building demand. That system collapses to a weighted split:
//! with `w_i = Σ_k A_{i,k} · r_k · (t_in,i - t_out)` every room receives
//! `q_mod · w_i / Σ_j w_j`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{BoundaryKind, BuildingModel, Room, URatios};
use crate::lmtd::{lmtd, LmtdError};

pub const DEFAULT_HALLWAY_T_SUP_C: f64 = 45.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadsError {
    #[error("demand must be finite and >= 0, got {0} W")]
    InvalidDemand(f64),
    #[error("no room is colder than the outdoor temperature {t_out_c} °C")]
    NoHeatedRoom { t_out_c: f64 },
    #[error("cannot allocate {q_mod_w} W at {t_out_c} °C: heated rooms have no envelope area")]
    Infeasible { q_mod_w: f64, t_out_c: f64 },
    #[error("hallway {hallway:?} has {residual_w} W residual load but no adjacent rooms")]
    HallwayWithoutNeighbours { hallway: String, residual_w: f64 },
    #[error(transparent)]
    Lmtd(#[from] LmtdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolvedU {
    pub u_wall: f64,
    pub u_window: f64,
    pub u_roof: f64,
    pub u_floor_slab: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomLoad {
    pub room_id: String,
    #[serde(rename = "q_mod_W")]
    pub q_mod_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomLoads {
    pub cluster: usize,
    #[serde(rename = "t_out_C")]
    pub t_out_c: f64,
    /// Building demand that was allocated.
    #[serde(rename = "q_total_W")]
    pub q_total_w: f64,
    /// One entry per room, in building order.
    pub rooms: Vec<RoomLoad>,
    pub solved_u: SolvedU,
    #[serde(rename = "hallway_residual_W")]
    pub hallway_residual_w: BTreeMap<String, f64>,
}

impl RoomLoads {
    pub fn room_load(&self, room_id: &str) -> Option<f64> {
        self.rooms
            .iter()
            .find(|r| r.room_id == room_id)
            .map(|r| r.q_mod_w)
    }

    pub fn total_w(&self) -> f64 {
        self.rooms.iter().map(|r| r.q_mod_w).sum()
    }
}

/// Relative envelope weight of a room at `t_out_c`; zero when the room is
/// not colder inside than outside.
pub fn envelope_weight(room: &Room, ratios: &URatios, t_out_c: f64) -> f64 {
    let dt = room.t_in_c - t_out_c;
    if dt <= 0.0 {
        return 0.0;
    }
    let ua: f64 = room
        .boundaries
        .iter()
        .map(|b| b.area_m2 * ratios.relative_u(b.kind))
        .sum();
    ua * dt
}

pub fn solve_room_loads(
    building: &BuildingModel,
    ratios: &URatios,
    q_mod_w: f64,
    t_out_c: f64,
) -> Result<RoomLoads, LoadsError> {
    if !(q_mod_w.is_finite() && q_mod_w >= 0.0) {
        return Err(LoadsError::InvalidDemand(q_mod_w));
    }
    if !building.rooms.iter().any(|r| r.t_in_c > t_out_c) {
        return Err(LoadsError::NoHeatedRoom { t_out_c });
    }
    let weights: Vec<f64> = building
        .rooms
        .iter()
        .map(|r| envelope_weight(r, ratios, t_out_c))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 && q_mod_w > 0.0 {
        return Err(LoadsError::Infeasible { q_mod_w, t_out_c });
    }
    let rooms = building
        .rooms
        .iter()
        .zip(&weights)
        .map(|(room, &w)| RoomLoad {
            room_id: room.id.clone(),
            q_mod_w: if w > 0.0 { q_mod_w * (w / total) } else { 0.0 },
        })
        .collect();
    // U_k = scale · r_k with scale = q_mod / Σ_i Σ_k A·r·ΔT.
    let scale = if total > 0.0 { q_mod_w / total } else { 0.0 };
    let u = |k: BoundaryKind| scale * ratios.relative_u(k);
    Ok(RoomLoads {
        cluster: 0,
        t_out_c,
        q_total_w: q_mod_w,
        rooms,
        solved_u: SolvedU {
            u_wall: u(BoundaryKind::Wall),
            u_window: u(BoundaryKind::Window),
            u_roof: u(BoundaryKind::Roof),
            u_floor_slab: u(BoundaryKind::FloorSlab),
        },
        hallway_residual_w: BTreeMap::new(),
    })
}

/// Supply/return spread used when rating hallway heaters at the assumed
/// reduced supply temperature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HallwaySpreadRule {
    /// Keep the nominal spread; shrink it proportionally only when the
    /// return temperature would otherwise fall to room temperature.
    #[default]
    NominalUnlessInfeasible,
    /// Always shrink the spread to `(t_sup - t_in) · ΔT_nom / (t_sup_nom - t_in)`.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallwayAssumption {
    #[serde(rename = "assumed_t_sup_C")]
    pub assumed_t_sup_c: f64,
    pub spread_rule: HallwaySpreadRule,
}

impl Default for HallwayAssumption {
    fn default() -> Self {
        Self {
            assumed_t_sup_c: DEFAULT_HALLWAY_T_SUP_C,
            spread_rule: HallwaySpreadRule::default(),
        }
    }
}

/// Heat a hallway's heaters deliver at the assumed supply temperature.
pub fn hallway_capacity(
    hallway: &Room,
    assumed_t_sup_c: f64,
    rule: HallwaySpreadRule,
) -> Result<f64, LoadsError> {
    let t_in = hallway.t_in_c;
    if assumed_t_sup_c <= t_in {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for heater in &hallway.heaters {
        let dt_nom = heater.delta_t_nom_k();
        let shrunk = (assumed_t_sup_c - t_in) * dt_nom / (heater.t_sup_nom_c - t_in);
        let dt = match rule {
            HallwaySpreadRule::Proportional => shrunk,
            HallwaySpreadRule::NominalUnlessInfeasible => {
                if assumed_t_sup_c - dt_nom <= t_in {
                    shrunk
                } else {
                    dt_nom
                }
            }
        };
        let lmtd_nom = lmtd(heater.t_sup_nom_c, heater.t_ret_nom_c, t_in)?;
        let lmtd_now = lmtd(assumed_t_sup_c, assumed_t_sup_c - dt, t_in)?;
        total += heater.q_nom_w * (lmtd_now / lmtd_nom).powf(heater.exponent_n);
    }
    Ok(total)
}

pub fn hallway_capacities(
    building: &BuildingModel,
    assumption: &HallwayAssumption,
) -> Result<BTreeMap<String, f64>, LoadsError> {
    building
        .rooms
        .iter()
        .filter(|r| r.is_hallway())
        .map(|r| {
            hallway_capacity(r, assumption.assumed_t_sup_c, assumption.spread_rule)
                .map(|c| (r.id.clone(), c))
        })
        .collect()
}

/// Caps each hallway at its heater capacity and hands the uncovered load to
/// the rooms sharing a wall with it, proportional to the shared area.
pub fn partition_hallway_residual(
    mut loads: RoomLoads,
    building: &BuildingModel,
    capacities: &BTreeMap<String, f64>,
) -> Result<RoomLoads, LoadsError> {
    let index: BTreeMap<String, usize> = loads
        .rooms
        .iter()
        .enumerate()
        .map(|(i, r)| (r.room_id.clone(), i))
        .collect();
    for hallway in building.rooms.iter().filter(|r| r.is_hallway()) {
        let Some(&hi) = index.get(hallway.id.as_str()) else {
            continue;
        };
        let capacity = capacities.get(&hallway.id).copied().unwrap_or(0.0);
        let q_hallway = loads.rooms[hi].q_mod_w;
        let residual = (q_hallway - capacity).max(0.0);
        if residual <= 0.0 {
            continue;
        }
        let neighbours: Vec<(&str, f64)> = building
            .hallway_neighbours(&hallway.id)
            .map(|(r, a)| (r.id.as_str(), a))
            .collect();
        let shared: f64 = neighbours.iter().map(|(_, a)| a).sum();
        if neighbours.is_empty() || shared <= 0.0 {
            return Err(LoadsError::HallwayWithoutNeighbours {
                hallway: hallway.id.clone(),
                residual_w: residual,
            });
        }
        loads.rooms[hi].q_mod_w = capacity;
        for (room_id, area) in neighbours {
            let ni = index[room_id];
            loads.rooms[ni].q_mod_w += residual * (area / shared);
        }
        loads.hallway_residual_w.insert(hallway.id.clone(), residual);
    }
    Ok(loads)
}

/// Room loads for one (cluster, outdoor temperature) cell, hallway rule applied.
pub fn allocate(
    building: &BuildingModel,
    ratios: &URatios,
    capacities: &BTreeMap<String, f64>,
    cluster: usize,
    q_mod_w: f64,
    t_out_c: f64,
) -> Result<RoomLoads, LoadsError> {
    let mut loads = solve_room_loads(building, ratios, q_mod_w, t_out_c)?;
    loads.cluster = cluster;
    partition_hallway_residual(loads, building, capacities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::{load_building, u_ratios, Boundary, Heater, RoomType, URatioTable};
    use approx::assert_relative_eq;

    fn room(id: &str, wall: f64) -> Room {
        Room {
            id: id.into(),
            room_type: RoomType::Standard,
            t_in_c: 20.0,
            floor: None,
            boundaries: vec![Boundary { kind: BoundaryKind::Wall, area_m2: wall }],
            heaters: vec![],
            hallway_shared_wall_m2: BTreeMap::new(),
        }
    }

    fn building(rooms: Vec<Room>) -> BuildingModel {
        BuildingModel {
            building_id: "t".into(),
            construction_type: "X".into(),
            rooms,
        }
    }

    fn unit_ratios() -> URatios {
        u_ratios(&URatioTable { u_wall: 1.0, u_window: 1.0, u_roof: 1.0, u_floor_slab: 1.0 })
    }

    #[test]
    fn identical_rooms_split_evenly() {
        let b = building(vec![room("a", 10.0), room("b", 10.0)]);
        let l = solve_room_loads(&b, &unit_ratios(), 1000.0, 0.0).unwrap();
        assert_eq!(l.room_load("a"), Some(500.0));
        assert_eq!(l.room_load("b"), Some(500.0));
    }

    #[test]
    fn double_weight_gets_double_share() {
        let b = building(vec![room("a", 20.0), room("b", 10.0)]);
        let l = solve_room_loads(&b, &unit_ratios(), 900.0, 5.0).unwrap();
        assert_relative_eq!(l.room_load("a").unwrap(), 600.0, max_relative = 1e-12);
        assert_relative_eq!(l.room_load("b").unwrap(), 300.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_demand_gives_zero_loads() {
        let b = building(vec![room("a", 20.0), room("b", 10.0)]);
        let l = solve_room_loads(&b, &unit_ratios(), 0.0, 5.0).unwrap();
        assert!(l.rooms.iter().all(|r| r.q_mod_w == 0.0));
    }

    #[test]
    fn warm_rooms_get_exactly_zero() {
        let mut bath = room("bath", 10.0);
        bath.t_in_c = 18.0;
        let b = building(vec![room("a", 10.0), bath]);
        let l = solve_room_loads(&b, &unit_ratios(), 700.0, 19.0).unwrap();
        assert_eq!(l.room_load("bath"), Some(0.0));
        assert_eq!(l.room_load("a"), Some(700.0));
    }

    #[test]
    fn solved_u_reproduces_room_loads() {
        let t = URatioTable { u_wall: 0.5, u_window: 2.5, u_roof: 0.25, u_floor_slab: 0.75 };
        let mut a = room("a", 12.0);
        a.boundaries.push(Boundary { kind: BoundaryKind::Window, area_m2: 3.0 });
        let mut c = room("c", 8.0);
        c.boundaries.push(Boundary { kind: BoundaryKind::Roof, area_m2: 20.0 });
        let b = building(vec![a, c]);
        let l = solve_room_loads(&b, &u_ratios(&t), 2500.0, -5.0).unwrap();
        let u = l.solved_u;
        let qa = (12.0 * u.u_wall + 3.0 * u.u_window) * 25.0;
        assert_relative_eq!(l.room_load("a").unwrap(), qa, max_relative = 1e-12);
        assert_relative_eq!(u.u_wall / u.u_window, 0.2, max_relative = 1e-12);
        assert_relative_eq!(l.total_w(), 2500.0, max_relative = 1e-12);
    }

    #[test]
    fn no_envelope_is_infeasible() {
        let mut a = room("a", 1.0);
        a.boundaries.clear();
        let b = building(vec![a]);
        assert!(matches!(
            solve_room_loads(&b, &unit_ratios(), 10.0, 0.0),
            Err(LoadsError::Infeasible { .. })
        ));
    }

    #[test]
    fn all_rooms_warm_is_reported() {
        let b = building(vec![room("a", 1.0)]);
        assert!(matches!(
            solve_room_loads(&b, &unit_ratios(), 10.0, 25.0),
            Err(LoadsError::NoHeatedRoom { .. })
        ));
    }

    fn hallway_with_heater() -> Room {
        let mut h = room("hall", 10.0);
        h.room_type = RoomType::Hallway;
        h.heaters.push(Heater {
            id: "hh".into(),
            q_nom_w: 1000.0,
            t_sup_nom_c: 70.0,
            t_ret_nom_c: 55.0,
            exponent_n: 1.3,
        });
        h
    }

    #[test]
    fn capacity_at_nominal_supply_is_nominal() {
        let h = hallway_with_heater();
        for rule in [HallwaySpreadRule::NominalUnlessInfeasible, HallwaySpreadRule::Proportional] {
            let c = hallway_capacity(&h, 70.0, rule).unwrap();
            assert_relative_eq!(c, 1000.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn capacity_at_room_temperature_is_zero() {
        let h = hallway_with_heater();
        assert_eq!(hallway_capacity(&h, 20.0, HallwaySpreadRule::default()).unwrap(), 0.0);
    }

    #[test]
    fn capacity_with_proportional_spread() {
        // 1000 · (LMTD(45, 37.5, 20) / LMTD(70, 55, 20))^1.3
        let h = hallway_with_heater();
        let c = hallway_capacity(&h, 45.0, HallwaySpreadRule::Proportional).unwrap();
        assert_relative_eq!(c, 406.126_198_178_118, max_relative = 1e-10);
        // Proportional shrink scales the LMTD linearly with (t_sup - t_in).
        assert_relative_eq!(c, 1000.0 * 0.5f64.powf(1.3), max_relative = 1e-10);
    }

    #[test]
    fn capacity_with_nominal_spread() {
        // 1000 · (LMTD(45, 30, 20) / LMTD(70, 55, 20))^1.3
        let h = hallway_with_heater();
        let c = hallway_capacity(&h, 45.0, HallwaySpreadRule::NominalUnlessInfeasible).unwrap();
        assert_relative_eq!(c, 293.299_349_819_256, max_relative = 1e-10);
        // 33 - 15 <= 20 falls back to the shrunk spread.
        let shrunk = hallway_capacity(&h, 33.0, HallwaySpreadRule::NominalUnlessInfeasible).unwrap();
        let prop = hallway_capacity(&h, 33.0, HallwaySpreadRule::Proportional).unwrap();
        assert_eq!(shrunk, prop);
    }

    fn corridor_building() -> BuildingModel {
        load_building(
            r#"{
            "building_id": "c", "construction_type": "X",
            "rooms": [
                {"id": "hall", "room_type": "hallway",
                 "boundaries": [{"kind": "wall", "area_m2": 30.0}], "heaters": []},
                {"id": "a", "room_type": "standard",
                 "boundaries": [{"kind": "wall", "area_m2": 10.0}],
                 "heaters": [{"id": "ha", "q_nom_W": 1000, "t_sup_nom_C": 70, "t_ret_nom_C": 55}],
                 "hallway_shared_wall_m2": {"hall": 10.0}},
                {"id": "b", "room_type": "standard",
                 "boundaries": [{"kind": "wall", "area_m2": 20.0}],
                 "heaters": [{"id": "hb", "q_nom_W": 1000, "t_sup_nom_C": 70, "t_ret_nom_C": 55}],
                 "hallway_shared_wall_m2": {"hall": 20.0}}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn residual_split_by_shared_wall() {
        let b = corridor_building();
        let loads = solve_room_loads(&b, &unit_ratios(), 600.0, 10.0).unwrap();
        // 30:10:20 weights → hall 300, a 100, b 200
        assert_relative_eq!(loads.room_load("hall").unwrap(), 300.0, max_relative = 1e-12);
        let caps = BTreeMap::from([("hall".to_string(), 0.0)]);
        let out = partition_hallway_residual(loads.clone(), &b, &caps).unwrap();
        assert_eq!(out.room_load("hall"), Some(0.0));
        assert_relative_eq!(out.room_load("a").unwrap(), 200.0, max_relative = 1e-12);
        assert_relative_eq!(out.room_load("b").unwrap(), 400.0, max_relative = 1e-12);
        assert_relative_eq!(out.hallway_residual_w["hall"], 300.0, max_relative = 1e-12);
        assert_relative_eq!(out.total_w(), loads.total_w(), max_relative = 1e-12);
    }

    #[test]
    fn no_residual_leaves_loads_unchanged() {
        let b = corridor_building();
        let loads = solve_room_loads(&b, &unit_ratios(), 600.0, 10.0).unwrap();
        let caps = BTreeMap::from([("hall".to_string(), 5000.0)]);
        let out = partition_hallway_residual(loads.clone(), &b, &caps).unwrap();
        assert_eq!(out, loads);
    }

    #[test]
    fn residual_without_neighbours_is_an_error() {
        let mut b = corridor_building();
        for r in &mut b.rooms {
            r.hallway_shared_wall_m2.clear();
        }
        let loads = solve_room_loads(&b, &unit_ratios(), 600.0, 10.0).unwrap();
        let caps = BTreeMap::from([("hall".to_string(), 100.0)]);
        assert!(matches!(
            partition_hallway_residual(loads, &b, &caps),
            Err(LoadsError::HallwayWithoutNeighbours { .. })
        ));
    }
}
