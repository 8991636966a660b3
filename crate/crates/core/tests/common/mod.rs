//! Independent reference implementations and synthetic data shared by the
//! integration tests. Nothing here calls the solver code it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use heatcurve_core::building::{
    Boundary, BoundaryKind, BuildingModel, Heater, Room, RoomType, URatioTable,
};
use heatcurve_core::ingest::{AlignedSeries, DayClock, RawSeries, SeriesKind};

pub fn start_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 4, 0, 0, 0).unwrap()
}

pub fn table(u_wall: f64, u_window: f64, u_roof: f64, u_floor_slab: f64) -> URatioTable {
    URatioTable {
        u_wall,
        u_window,
        u_roof,
        u_floor_slab,
    }
}

pub fn heater(id: &str, q_nom_w: f64, t_sup: f64, t_ret: f64, n: f64) -> Heater {
    Heater {
        id: id.into(),
        q_nom_w,
        t_sup_nom_c: t_sup,
        t_ret_nom_c: t_ret,
        exponent_n: n,
    }
}

/// Room with areas in wall, window, roof, floor-slab order; zero areas are omitted.
pub fn room(id: &str, room_type: RoomType, t_in_c: f64, areas: [f64; 4], heaters: Vec<Heater>) -> Room {
    let boundaries = BoundaryKind::ALL
        .iter()
        .zip(areas)
        .filter(|(_, a)| *a > 0.0)
        .map(|(&kind, area_m2)| Boundary { kind, area_m2 })
        .collect();
    Room {
        id: id.into(),
        room_type,
        t_in_c,
        floor: None,
        boundaries,
        heaters,
        hallway_shared_wall_m2: BTreeMap::new(),
    }
}

pub fn building(rooms: Vec<Room>) -> BuildingModel {
    BuildingModel {
        building_id: "synthetic".into(),
        construction_type: "test".into(),
        rooms,
    }
}

pub fn random_table<R: Rng>(rng: &mut R) -> URatioTable {
    table(
        rng.random_range(0.1..2.0),
        rng.random_range(0.7..5.0),
        rng.random_range(0.1..2.0),
        rng.random_range(0.1..2.0),
    )
}

/// Up to `max_rooms` rooms without hallways, every room colder-capable.
pub fn random_building<R: Rng>(rng: &mut R, max_rooms: usize) -> BuildingModel {
    let n = rng.random_range(1..=max_rooms);
    let rooms = (0..n)
        .map(|i| {
            let mut areas = [0.0; 4];
            for a in &mut areas {
                if rng.random_bool(0.7) {
                    *a = rng.random_range(0.5..40.0);
                }
            }
            if areas.iter().all(|a| *a == 0.0) {
                areas[0] = rng.random_range(0.5..40.0);
            }
            let t_in = if rng.random_bool(0.2) { 18.0 } else { rng.random_range(19.0..23.0) };
            let kind = if t_in == 18.0 { RoomType::Bathroom } else { RoomType::Standard };
            let heaters = (0..rng.random_range(1..=2))
                .map(|j| {
                    let t_sup = rng.random_range(55.0..90.0);
                    let t_ret = t_sup - rng.random_range(5.0..25.0);
                    heater(&format!("h{i}_{j}"), rng.random_range(300.0..3000.0), t_sup, t_ret.max(t_in + 5.0), 1.3)
                })
                .collect();
            room(&format!("r{i}"), kind, t_in, areas, heaters)
        })
        .collect();
    building(rooms)
}

/// Explicit square system in (q_1..q_n, U_wall, U_window, U_roof, U_floor_slab):
/// one heat-flow equation per room, three ratio equations against the anchor
/// and the total-demand closure.
pub fn dense_allocation(
    building: &BuildingModel,
    u: &URatioTable,
    anchor: BoundaryKind,
    q_mod_w: f64,
    t_out_c: f64,
) -> (Vec<f64>, [f64; 4]) {
    let n = building.rooms.len();
    let dim = n + 4;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    let kinds = [BoundaryKind::Wall, BoundaryKind::Window, BoundaryKind::Roof, BoundaryKind::FloorSlab];
    let abs_u = [u.u_wall, u.u_window, u.u_roof, u.u_floor_slab];
    for (i, r) in building.rooms.iter().enumerate() {
        a[(i, i)] = 1.0;
        let dt = r.t_in_c - t_out_c;
        if dt > 0.0 {
            for bnd in &r.boundaries {
                let k = kinds.iter().position(|k| *k == bnd.kind).unwrap();
                a[(i, n + k)] -= bnd.area_m2 * dt;
            }
        }
    }
    let anchor_col = kinds.iter().position(|k| *k == anchor).unwrap();
    let mut row = n;
    for (k, _) in kinds.iter().enumerate() {
        if k == anchor_col {
            continue;
        }
        a[(row, n + k)] = 1.0;
        a[(row, n + anchor_col)] = -abs_u[k] / abs_u[anchor_col];
        row += 1;
    }
    for i in 0..n {
        a[(row, i)] = 1.0;
    }
    b[row] = q_mod_w;
    let x = a.lu().solve(&b).expect("allocation system is regular");
    let q = x.iter().take(n).copied().collect();
    (q, [x[n], x[n + 1], x[n + 2], x[n + 3]])
}

/// Room heat flows from absolute U-values, W.
pub fn envelope_loads_w(building: &BuildingModel, u: &URatioTable, t_out_c: f64) -> Vec<f64> {
    building
        .rooms
        .iter()
        .map(|r| {
            let dt = r.t_in_c - t_out_c;
            if dt <= 0.0 {
                return 0.0;
            }
            r.boundaries
                .iter()
                .map(|b| {
                    let uk = match b.kind {
                        BoundaryKind::Wall => u.u_wall,
                        BoundaryKind::Window => u.u_window,
                        BoundaryKind::Roof => u.u_roof,
                        BoundaryKind::FloorSlab => u.u_floor_slab,
                    };
                    b.area_m2 * uk * dt
                })
                .sum()
        })
        .collect()
}

pub fn direct_lmtd(t_sup: f64, t_ret: f64, t_in: f64) -> f64 {
    (t_sup - t_ret) / ((t_sup - t_in) / (t_ret - t_in)).ln()
}

/// Supply temperature at which `h`, keeping its nominal spread, emits `q_w`.
/// Solved by bisection on the forward radiator characteristic.
pub fn bisect_supply_temp(h: &Heater, t_in: f64, q_w: f64) -> f64 {
    if q_w <= 0.0 {
        return t_in;
    }
    let dt = h.t_sup_nom_c - h.t_ret_nom_c;
    let l_nom = direct_lmtd(h.t_sup_nom_c, h.t_ret_nom_c, t_in);
    let output = |ts: f64| h.q_nom_w * (direct_lmtd(ts, ts - dt, t_in) / l_nom).powf(h.exponent_n);
    let mut lo = t_in + dt + 1e-9;
    let mut hi = t_in + dt + 1.0;
    while output(hi) < q_w {
        hi += 2.0 * (hi - t_in);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if output(mid) < q_w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Raw series sampled exactly on the 10-minute grid.
pub fn grid_raw(start: DateTime<Utc>, demand_kw: &[f64], t_out_c: &[f64]) -> (RawSeries, RawSeries) {
    let at = |i: usize| start + Duration::minutes(10 * i as i64);
    let d = demand_kw.iter().enumerate().map(|(i, v)| (at(i), *v)).collect();
    let w = t_out_c.iter().enumerate().map(|(i, v)| (at(i), *v)).collect();
    (RawSeries::new(SeriesKind::HeatPowerKw, d), RawSeries::new(SeriesKind::OutdoorTempC, w))
}

pub fn aligned(demand_kw: Vec<f64>, t_out_c: Vec<f64>) -> AlignedSeries {
    AlignedSeries {
        start: start_time(),
        clock: DayClock::default(),
        demand_kw: demand_kw.into_iter().map(Some).collect(),
        t_out_c: t_out_c.into_iter().map(Some).collect(),
    }
}

/// Night regime from 22:00 to 06:00.
pub fn is_night(interval: usize) -> bool {
    !(36..132).contains(&interval)
}

/// Distinct day and night demand levels, both falling with outdoor
/// temperature, plus bounded noise.
pub fn two_regime_series<R: Rng>(rng: &mut R, days: usize) -> AlignedSeries {
    let mut demand = Vec::with_capacity(days * 144);
    let mut t_out = Vec::with_capacity(days * 144);
    for d in 0..days {
        let base = -8.0 + 20.0 * (d as f64 / days as f64);
        for i in 0..144 {
            let t = base + 3.0 * ((i as f64 / 144.0) * std::f64::consts::TAU).sin();
            let level = if is_night(i) { 8.0 } else { 30.0 };
            demand.push((level + 0.6 * (15.0 - t)).max(0.0) + rng.random_range(-1.0..1.0));
            t_out.push(t);
        }
    }
    aligned(demand, t_out)
}

/// Four rooms with known absolute U-values; the bathroom heater is the
/// undersized one.
pub fn four_room_building() -> (BuildingModel, URatioTable) {
    let u = table(0.5, 2.0, 0.25, 0.75);
    let rooms = vec![
        room("living", RoomType::Standard, 20.0, [28.0, 6.0, 0.0, 20.0],
            vec![heater("living_a", 1400.0, 70.0, 55.0, 1.3), heater("living_b", 1000.0, 70.0, 55.0, 1.3)]),
        room("kitchen", RoomType::Standard, 20.0, [14.0, 2.5, 0.0, 10.0],
            vec![heater("kitchen_a", 1300.0, 70.0, 55.0, 1.3)]),
        room("bath", RoomType::Bathroom, 22.0, [8.0, 1.0, 6.0, 0.0],
            vec![heater("bath_a", 300.0, 70.0, 55.0, 1.2)]),
        room("bedroom", RoomType::Standard, 18.0, [18.0, 3.0, 14.0, 0.0],
            vec![heater("bedroom_a", 1600.0, 75.0, 60.0, 1.33)]),
    ];
    (building(rooms), u)
}

pub const SYNTHETIC_T_OUT: std::ops::RangeInclusive<i32> = -10..=15;

/// Outdoor temperature cycling through every integer of
/// [`SYNTHETIC_T_OUT`], demand in kW from the building's own heat flows
/// scaled by `factor(interval_of_day)`.
pub fn synthetic_raw(
    building: &BuildingModel,
    u: &URatioTable,
    days: usize,
    factor: impl Fn(usize) -> f64,
) -> (RawSeries, RawSeries) {
    let temps: Vec<i32> = SYNTHETIC_T_OUT.collect();
    let n = days * 144;
    let mut t_out = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    for i in 0..n {
        // Stride coprime to the temperature count, so each interval of day
        // sees many temperatures.
        let t = temps[(i * 7 + i / 144) % temps.len()] as f64;
        let q: f64 = envelope_loads_w(building, u, t).iter().sum();
        t_out.push(t);
        demand.push(q / 1000.0 * factor(i % 144));
    }
    grid_raw(start_time(), &demand, &t_out)
}
