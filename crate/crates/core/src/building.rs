//! Static building description: rooms, envelope boundaries, heaters and the
//! typical U-value table used to derive relative heat-loss weights.
//!
//! Only areas of boundaries that exchange heat with the outside are stored.
//! Heat transfer between rooms is not modelled; the one exception is the
//! wall area a room shares with a hallway, which is used to hand a hallway's
//! uncovered load to its neighbours.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_T_IN_C: f64 = 20.0;
pub const DEFAULT_BATHROOM_T_IN_C: f64 = 18.0;
pub const DEFAULT_EXPONENT_N: f64 = 1.3;
pub const EXPONENT_RANGE: (f64, f64) = (1.0, 1.6);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildingError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid value at {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("construction type {0:?} not found in U-value table")]
    UnknownConstructionType(String),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> BuildingError {
    BuildingError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Wall,
    Window,
    Roof,
    FloorSlab,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 4] = [
        BoundaryKind::Wall,
        BoundaryKind::Window,
        BoundaryKind::Roof,
        BoundaryKind::FloorSlab,
    ];

    pub fn index(self) -> usize {
        match self {
            BoundaryKind::Wall => 0,
            BoundaryKind::Window => 1,
            BoundaryKind::Roof => 2,
            BoundaryKind::FloorSlab => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::Wall => "wall",
            BoundaryKind::Window => "window",
            BoundaryKind::Roof => "roof",
            BoundaryKind::FloorSlab => "floor_slab",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomType {
    Standard,
    Bathroom,
    Hallway,
    Staircase,
}

impl RoomType {
    pub fn default_t_in_c(self) -> f64 {
        match self {
            RoomType::Bathroom => DEFAULT_BATHROOM_T_IN_C,
            _ => DEFAULT_T_IN_C,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub kind: BoundaryKind,
    pub area_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heater {
    pub id: String,
    #[serde(rename = "q_nom_W")]
    pub q_nom_w: f64,
    #[serde(rename = "t_sup_nom_C")]
    pub t_sup_nom_c: f64,
    #[serde(rename = "t_ret_nom_C")]
    pub t_ret_nom_c: f64,
    pub exponent_n: f64,
}

impl Heater {
    pub fn delta_t_nom_k(&self) -> f64 {
        self.t_sup_nom_c - self.t_ret_nom_c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Room {
    pub id: String,
    pub room_type: RoomType,
    #[serde(rename = "t_in_C")]
    pub t_in_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<i32>,
    pub boundaries: Vec<Boundary>,
    pub heaters: Vec<Heater>,
    /// Wall area shared with each adjacent hallway, keyed by hallway room id.
    #[serde(rename = "hallway_shared_wall_m2", skip_serializing_if = "BTreeMap::is_empty")]
    pub hallway_shared_wall_m2: BTreeMap<String, f64>,
}

impl Room {
    pub fn is_hallway(&self) -> bool {
        self.room_type == RoomType::Hallway
    }

    /// Total boundary area per kind, indexed by [`BoundaryKind::index`].
    pub fn areas_by_kind(&self) -> [f64; 4] {
        let mut areas = [0.0; 4];
        for b in &self.boundaries {
            areas[b.kind.index()] += b.area_m2;
        }
        areas
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildingModel {
    pub building_id: String,
    pub construction_type: String,
    pub rooms: Vec<Room>,
}

impl BuildingModel {
    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn heater_count(&self) -> usize {
        self.rooms.iter().map(|r| r.heaters.len()).sum()
    }

    /// Number of distinct floors among rooms that declare one.
    pub fn floor_count(&self) -> usize {
        self.rooms
            .iter()
            .filter_map(|r| r.floor)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Rooms declaring a shared wall with `hallway_id`, with the shared area.
    pub fn hallway_neighbours<'a>(
        &'a self,
        hallway_id: &'a str,
    ) -> impl Iterator<Item = (&'a Room, f64)> + 'a {
        self.rooms
            .iter()
            .filter_map(move |r| r.hallway_shared_wall_m2.get(hallway_id).map(|a| (r, *a)))
    }

    /// Highest set-point among non-hallway rooms that have heaters.
    pub fn max_heated_t_in_c(&self) -> Option<f64> {
        self.rooms
            .iter()
            .filter(|r| !r.is_hallway() && !r.heaters.is_empty())
            .map(|r| r.t_in_c)
            .reduce(f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("building serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub default_exponent_n: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            default_exponent_n: DEFAULT_EXPONENT_N,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildingDocument {
    building_id: String,
    construction_type: String,
    rooms: Vec<RoomDocument>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomDocument {
    id: String,
    room_type: RoomType,
    #[serde(rename = "t_in_C", default)]
    t_in_c: Option<f64>,
    #[serde(default)]
    floor: Option<i32>,
    boundaries: Vec<Boundary>,
    #[serde(default)]
    heaters: Vec<HeaterDocument>,
    #[serde(default)]
    hallway_shared_wall_m2: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaterDocument {
    id: String,
    #[serde(rename = "q_nom_W")]
    q_nom_w: f64,
    #[serde(rename = "t_sup_nom_C")]
    t_sup_nom_c: f64,
    #[serde(rename = "t_ret_nom_C")]
    t_ret_nom_c: f64,
    #[serde(default)]
    exponent_n: Option<f64>,
}

/// Parses and validates a building description with default options.
pub fn load_building(document: &str) -> Result<BuildingModel, BuildingError> {
    load_building_with(document, &LoadOptions::default())
}

pub fn load_building_with(
    document: &str,
    options: &LoadOptions,
) -> Result<BuildingModel, BuildingError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: BuildingDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        BuildingError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    let model = resolve(doc, options);
    validate(&model)?;
    Ok(model)
}

fn resolve(doc: BuildingDocument, options: &LoadOptions) -> BuildingModel {
    let rooms = doc
        .rooms
        .into_iter()
        .map(|r| Room {
            t_in_c: r.t_in_c.unwrap_or_else(|| r.room_type.default_t_in_c()),
            id: r.id,
            room_type: r.room_type,
            floor: r.floor,
            boundaries: r.boundaries,
            heaters: r
                .heaters
                .into_iter()
                .map(|h| Heater {
                    id: h.id,
                    q_nom_w: h.q_nom_w,
                    t_sup_nom_c: h.t_sup_nom_c,
                    t_ret_nom_c: h.t_ret_nom_c,
                    exponent_n: h.exponent_n.unwrap_or(options.default_exponent_n),
                })
                .collect(),
            hallway_shared_wall_m2: r.hallway_shared_wall_m2,
        })
        .collect();
    BuildingModel {
        building_id: doc.building_id,
        construction_type: doc.construction_type,
        rooms,
    }
}

/// Checks every structural and physical invariant of a building model.
pub fn validate(model: &BuildingModel) -> Result<(), BuildingError> {
    if model.rooms.is_empty() {
        return Err(invalid("rooms", "building has no rooms"));
    }
    let mut room_ids = BTreeSet::new();
    let mut heater_ids = BTreeSet::new();
    for (ri, room) in model.rooms.iter().enumerate() {
        let rpath = format!("rooms[{ri}]");
        if room.id.is_empty() {
            return Err(invalid(format!("{rpath}.id"), "room id is empty"));
        }
        if !room_ids.insert(room.id.as_str()) {
            return Err(invalid(
                format!("{rpath}.id"),
                format!("duplicate room id {:?}", room.id),
            ));
        }
        if !room.t_in_c.is_finite() {
            return Err(invalid(format!("{rpath}.t_in_C"), "indoor temperature must be finite"));
        }
        for (bi, b) in room.boundaries.iter().enumerate() {
            if !(b.area_m2.is_finite() && b.area_m2 > 0.0) {
                return Err(invalid(
                    format!("{rpath}.boundaries[{bi}].area_m2"),
                    format!("area must be > 0, got {}", b.area_m2),
                ));
            }
        }
        for (hi, h) in room.heaters.iter().enumerate() {
            let hpath = format!("{rpath}.heaters[{hi}]");
            if h.id.is_empty() {
                return Err(invalid(format!("{hpath}.id"), "heater id is empty"));
            }
            if !heater_ids.insert(h.id.as_str()) {
                return Err(invalid(
                    format!("{hpath}.id"),
                    format!("duplicate heater id {:?}", h.id),
                ));
            }
            if !(h.q_nom_w.is_finite() && h.q_nom_w > 0.0) {
                return Err(invalid(
                    format!("{hpath}.q_nom_W"),
                    format!("nominal output must be > 0, got {}", h.q_nom_w),
                ));
            }
            if !(h.t_sup_nom_c.is_finite() && h.t_ret_nom_c.is_finite()) {
                return Err(invalid(format!("{hpath}.t_sup_nom_C"), "temperatures must be finite"));
            }
            if h.t_sup_nom_c <= h.t_ret_nom_c {
                return Err(invalid(
                    format!("{hpath}.t_sup_nom_C"),
                    format!(
                        "nominal supply {} must exceed nominal return {}",
                        h.t_sup_nom_c, h.t_ret_nom_c
                    ),
                ));
            }
            if h.t_ret_nom_c <= room.t_in_c {
                return Err(invalid(
                    format!("{hpath}.t_ret_nom_C"),
                    format!(
                        "nominal return {} must exceed room temperature {}",
                        h.t_ret_nom_c, room.t_in_c
                    ),
                ));
            }
            let (lo, hi) = EXPONENT_RANGE;
            if !(lo..=hi).contains(&h.exponent_n) {
                return Err(invalid(
                    format!("{hpath}.exponent_n"),
                    format!("exponent {} outside [{lo}, {hi}]", h.exponent_n),
                ));
            }
        }
    }
    for (ri, room) in model.rooms.iter().enumerate() {
        for (hallway_id, area) in &room.hallway_shared_wall_m2 {
            let path = format!("rooms[{ri}].hallway_shared_wall_m2.{hallway_id}");
            match model.room(hallway_id) {
                None => {
                    return Err(invalid(path, format!("unknown hallway {hallway_id:?}")));
                }
                Some(h) if !h.is_hallway() => {
                    return Err(invalid(path, format!("room {hallway_id:?} is not a hallway")));
                }
                Some(_) => {}
            }
            if room.is_hallway() {
                return Err(invalid(path, "a hallway cannot take another hallway's load"));
            }
            if !(area.is_finite() && *area > 0.0) {
                return Err(invalid(path, format!("shared area must be > 0, got {area}")));
            }
        }
    }
    Ok(())
}

/// Typical U-values (W/m²K) of one construction type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct URatioTable {
    pub u_wall: f64,
    pub u_window: f64,
    pub u_roof: f64,
    pub u_floor_slab: f64,
}

impl URatioTable {
    pub fn get(&self, kind: BoundaryKind) -> f64 {
        match kind {
            BoundaryKind::Wall => self.u_wall,
            BoundaryKind::Window => self.u_window,
            BoundaryKind::Roof => self.u_roof,
            BoundaryKind::FloorSlab => self.u_floor_slab,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            u_wall: self.u_wall * factor,
            u_window: self.u_window * factor,
            u_roof: self.u_roof * factor,
            u_floor_slab: self.u_floor_slab * factor,
        }
    }

    pub fn validate(&self) -> Result<(), BuildingError> {
        for kind in BoundaryKind::ALL {
            let u = self.get(kind);
            if !(u.is_finite() && u > 0.0) {
                return Err(invalid(format!("u_{kind}"), format!("U-value must be > 0, got {u}")));
            }
        }
        Ok(())
    }
}

/// U-value tables keyed by construction type (e.g. `MFH_F`).
pub type UValueCatalog = BTreeMap<String, URatioTable>;

pub fn load_u_catalog(document: &str) -> Result<UValueCatalog, BuildingError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let catalog: UValueCatalog =
        serde_path_to_error::deserialize(de).map_err(|e| BuildingError::Schema {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
    for (key, table) in &catalog {
        table.validate().map_err(|e| match e {
            BuildingError::Invalid { path, message } => BuildingError::Invalid {
                path: format!("{key}.{path}"),
                message,
            },
            other => other,
        })?;
    }
    Ok(catalog)
}

pub fn lookup_u_table<'a>(
    catalog: &'a UValueCatalog,
    construction_type: &str,
) -> Result<&'a URatioTable, BuildingError> {
    catalog
        .get(construction_type)
        .ok_or_else(|| BuildingError::UnknownConstructionType(construction_type.to_string()))
}

/// The three independent U-value ratios, each relative to one anchor kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct URatios {
    pub anchor: BoundaryKind,
    relative: [f64; 4],
}

impl URatios {
    /// U of `kind` relative to the anchor; exactly 1 for the anchor itself.
    pub fn relative_u(&self, kind: BoundaryKind) -> f64 {
        self.relative[kind.index()]
    }

    /// The three non-anchor ratios in wall, window, roof, floor-slab order.
    pub fn triple(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut i = 0;
        for kind in BoundaryKind::ALL {
            if kind != self.anchor {
                out[i] = self.relative_u(kind);
                i += 1;
            }
        }
        out
    }
}

/// Window-anchored ratios: `(u_wall/u_window, u_roof/u_window, u_floor_slab/u_window)`.
pub fn u_ratios(table: &URatioTable) -> URatios {
    u_ratios_anchored(table, BoundaryKind::Window)
}

pub fn u_ratios_anchored(table: &URatioTable, anchor: BoundaryKind) -> URatios {
    let base = table.get(anchor);
    let mut relative = [0.0; 4];
    for kind in BoundaryKind::ALL {
        relative[kind.index()] = if kind == anchor {
            1.0
        } else {
            table.get(kind) / base
        };
    }
    URatios { anchor, relative }
}
