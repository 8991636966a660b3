//! Synthetic four-room house with 28 days of demand, weather and valve data.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde_json::json;

pub const DAYS: usize = 28;

fn outdoor_c(hour: f64) -> f64 {
    3.0 + 8.0 * (hour * std::f64::consts::TAU / (24.0 * 5.3)).sin() + 3.0 * (hour * std::f64::consts::TAU / 24.0).sin()
}

fn stamp(year: i32, minutes: usize) -> String {
    let t = chrono::NaiveDate::from_ymd_opt(year, 1, 4).unwrap().and_hms_opt(0, 0, 0).unwrap()
        + chrono::Duration::minutes(minutes as i64);
    format!("{}Z", t.format("%Y-%m-%dT%H:%M:%S"))
}

/// Night setback between 22:00 and 06:00, morning peak until 08:00.
fn demand_kw(interval_of_day: usize, t_out: f64) -> f64 {
    let base = 0.13 * (20.0 - t_out).max(0.0);
    match interval_of_day {
        0..=35 | 132..=143 => 0.55 * base,
        36..=47 => 1.35 * base,
        _ => base,
    }
}

/// Writes the data files and a `config.json` referencing them into `root`.
/// Demand timestamps start in `demand_year`; every other series in 2021.
pub fn write_dataset(root: &Path, demand_year: i32) -> io::Result<()> {
    let mut weather = String::from("timestamp,value\n");
    for h in 0..=DAYS * 24 {
        writeln!(weather, "{},{:.2}", stamp(2021, h * 60), outdoor_c(h as f64)).unwrap();
    }
    let mut demand = String::from("timestamp,value\n");
    let mut valves = String::from("timestamp,heater_id,opening_pct\n");
    for i in 0..DAYS * 144 {
        let t_out = outdoor_c(i as f64 / 6.0);
        let q = demand_kw(i % 144, t_out) + 0.05 * ((i as f64) * 0.77).sin();
        writeln!(demand, "{},{:.4}", stamp(demand_year, i * 10), q).unwrap();
        for (id, gain) in [("liv_1", 3.0), ("bath_1", 4.5)] {
            let open = (gain * (20.0 - t_out)).clamp(0.0, 100.0);
            writeln!(valves, "{},{id},{open:.1}", stamp(2021, i * 10)).unwrap();
        }
    }
    fs::write(root.join("weather.csv"), weather)?;
    fs::write(root.join("demand.csv"), demand)?;
    fs::write(root.join("valves.csv"), valves)?;

    let wall = |a: f64| json!({"kind": "wall", "area_m2": a});
    let window = |a: f64| json!({"kind": "window", "area_m2": a});
    let heater = |id: &str, q: f64, s: f64, r: f64| json!({"id": id, "q_nom_W": q, "t_sup_nom_C": s, "t_ret_nom_C": r});
    let building = json!({
        "building_id": "test_house",
        "construction_type": "MFH_F",
        "rooms": [
            {"id": "living", "room_type": "standard", "boundaries": [wall(24.0), window(6.0), {"kind": "floor_slab", "area_m2": 30.0}],
             "heaters": [heater("liv_1", 2200.0, 70.0, 55.0)], "hallway_shared_wall_m2": {"hall": 8.0}},
            {"id": "bath", "room_type": "bathroom", "boundaries": [wall(8.0), window(1.0)],
             "heaters": [heater("bath_1", 500.0, 70.0, 55.0)]},
            {"id": "bedroom", "room_type": "standard", "t_in_C": 18.0, "boundaries": [wall(14.0), window(3.0), {"kind": "roof", "area_m2": 16.0}],
             "heaters": [heater("bed_1", 1500.0, 75.0, 60.0)], "hallway_shared_wall_m2": {"hall": 4.0}},
            {"id": "hall", "room_type": "hallway", "boundaries": [wall(6.0)],
             "heaters": [heater("hall_1", 400.0, 70.0, 55.0)]}
        ]
    });
    fs::write(root.join("building.json"), serde_json::to_string_pretty(&building).unwrap())?;
    let catalog = json!({
        "MFH_F": {"u_wall": 1.0, "u_window": 2.7, "u_roof": 0.5, "u_floor_slab": 0.8},
        "MFH_J": {"u_wall": 0.6, "u_window": 1.9, "u_roof": 0.3, "u_floor_slab": 0.5}
    });
    fs::write(root.join("u_values.json"), catalog.to_string())?;

    let config = json!({
        "demand_csv": "demand.csv",
        "weather_csv": "weather.csv",
        "building_json": "building.json",
        "u_values_json": "u_values.json",
        "valve_csv": "valves.csv",
        "output_dir": "out",
        "n_cluster": 1,
        "experiment_from": "2021-01-28T00:00:00Z",
        "experiment_to": "2021-01-31T00:00:00Z"
    });
    fs::write(root.join("config.json"), config.to_string()).unwrap();    Ok(())
}
