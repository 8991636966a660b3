mod common;

use proptest::prelude::*;

use common::*;
use heatcurve_core::building::{u_ratios, u_ratios_anchored, BoundaryKind};
use heatcurve_core::cluster::compute_features;
use heatcurve_core::cluster::kmeans_fit;
use heatcurve_core::demand::fit_demand;
use heatcurve_core::heatcurve::{postprocess, Heatcurve, PostprocessOptions, Provenance};
use heatcurve_core::ingest::{align, DayClock};
use heatcurve_core::pipeline::{derive_curves, run, PipelineParams};
use heatcurve_core::smoothing::savgol_smooth;

fn raw_values(c: &Heatcurve) -> Vec<(f64, f64)> {
    c.computed().map(|(p, v)| (p.t_out_c, v)).collect()
}

#[test]
fn synthetic_building_recovers_loads_and_curve() {
    let (b, u) = four_room_building();
    let (rd, rw) = synthetic_raw(&b, &u, 26, |_| 1.0);
    let series = align(&rd, &rw).unwrap();
    let out = run(&series, &b, &u, &PipelineParams::default()).unwrap();
    let curve = &out.curves.raw_curves[0];
    let bins: Vec<i32> = curve.computed().map(|(p, _)| p.bin as i32).collect();
    assert_eq!(bins, SYNTHETIC_T_OUT.collect::<Vec<_>>());
    for loads in &out.curves.room_loads {
        let expected = envelope_loads_w(&b, &u, loads.t_out_c);
        for (r, e) in loads.rooms.iter().zip(&expected) {
            assert!((r.q_mod_w - e).abs() <= 0.01 * e, "{} at {}", r.room_id, loads.t_out_c);
        }
    }
    for (t, v) in raw_values(curve) {
        let expected = envelope_loads_w(&b, &u, t);
        let oracle = b
            .rooms
            .iter()
            .zip(&expected)
            .flat_map(|(r, q)| {
                let share = q / r.heaters.len() as f64;
                r.heaters.iter().map(move |h| bisect_supply_temp(h, r.t_in_c, share))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((v - oracle).abs() < 0.1, "t_out {t}: {v} vs {oracle}");
    }
    for w in raw_values(curve).windows(2) {
        assert!(w[1].1 <= w[0].1);
    }
    // The undersized bathroom heater sets the curve everywhere.
    assert!(curve.points.iter().all(|p| p.limiting_heater.as_deref() == Some("bath_a")));
    assert_eq!(out.curves.critical.limiting_counts["bath_a"], 26);
}

#[test]
fn anchor_and_scale_leave_curves_unchanged() {
    let (b, u) = four_room_building();
    let (rd, rw) = synthetic_raw(&b, &u, 26, |_| 1.0);
    let series = align(&rd, &rw).unwrap();
    let base = run(&series, &b, &u, &PipelineParams::default()).unwrap();
    for anchor in BoundaryKind::ALL {
        for factor in [0.1, 3.0, 1000.0] {
            let params = PipelineParams { ratio_anchor: anchor, ..Default::default() };
            let other = run(&series, &b, &u.scaled(factor), &params).unwrap();
            for (x, y) in base.curves.curves[0].points.iter().zip(&other.curves.curves[0].points) {
                assert!((x.t_sup_c - y.t_sup_c).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn relabelled_clusters_relabel_curves() {
    let (b, u) = four_room_building();
    let (rd, rw) = synthetic_raw(&b, &u, 26, |i| if is_night(i) { 0.6 } else { 1.0 });
    let series = align(&rd, &rw).unwrap();
    let f = compute_features(&series).unwrap();
    let m = kmeans_fit(&f, 2, 0, DayClock::default()).unwrap();
    let swapped = m.relabel(&[1, 0]);
    let params = PipelineParams::default();
    let ratios = u_ratios(&u);
    let a = derive_curves(&b, &ratios, &fit_demand(&series, &m, 1.0, 6).unwrap(), &params).unwrap();
    let s = derive_curves(&b, &ratios, &fit_demand(&series, &swapped, 1.0, 6).unwrap(), &params).unwrap();
    for c in 0..2 {
        assert_eq!(a.curves[c].points, s.curves[1 - c].points);
    }
}

#[test]
fn night_curve_runs_below_day_curve() {
    let (b, u) = four_room_building();
    let (rd, rw) = synthetic_raw(&b, &u, 26, |i| if is_night(i) { 0.6 } else { 1.0 });
    let series = align(&rd, &rw).unwrap();
    let params = PipelineParams { n_cluster: 2, ..Default::default() };
    let out = run(&series, &b, &u, &params).unwrap();
    assert_eq!(out.clusters.cluster_sizes(), vec![48, 96]);
    let night = raw_values(&out.curves.raw_curves[0]);
    let day = raw_values(&out.curves.raw_curves[1]);
    assert_eq!(night.len(), day.len());
    for ((tn, vn), (td, vd)) in night.iter().zip(&day) {
        assert_eq!(tn, td);
        assert!(vn < vd);
    }
}

#[test]
fn postprocess_is_idempotent_and_floored() {
    let (b, u) = four_room_building();
    let (rd, rw) = synthetic_raw(&b, &u, 26, |_| 1.0);
    let series = align(&rd, &rw).unwrap();
    let params = PipelineParams { safety_offset_k: 2.0, ..Default::default() };
    let out = run(&series, &b, &u, &params).unwrap();
    let once = &out.curves.curves[0];
    let twice = postprocess(once, &params.postprocess).unwrap();
    assert_eq!(once, &twice);
    assert_eq!(once.points.first().unwrap().t_out_c, -15.0);
    assert_eq!(once.points.last().unwrap().t_out_c, 20.0);
    let floor = b.max_heated_t_in_c().unwrap() + 1.0;
    assert!(once.points.iter().all(|p| p.t_sup_c >= floor));
    assert!(once.points.iter().filter(|p| p.t_out_c < -10.0).all(|p| p.provenance != Provenance::Computed));
}

#[test]
fn anchored_ratios_identical_loads_bitwise_for_dyadic_tables() {
    let (b, u) = four_room_building();
    let (rd, rw) = synthetic_raw(&b, &u, 26, |_| 1.0);
    let series = align(&rd, &rw).unwrap();
    let m = heatcurve_core::cluster::ClusterModel::single(DayClock::default());
    let dm = fit_demand(&series, &m, 1.0, 6).unwrap();
    let params = PipelineParams::default();
    let a = derive_curves(&b, &u_ratios(&u), &dm, &params).unwrap();
    let s = derive_curves(&b, &u_ratios_anchored(&u.scaled(8.0), BoundaryKind::Window), &dm, &params).unwrap();
    for (x, y) in a.room_loads.iter().zip(&s.room_loads) {
        assert_eq!(x.rooms, y.rooms);
    }
}

proptest! {
    #[test]
    fn savgol_reproduces_quadratics(c0 in -100.0f64..100.0, c1 in -10.0f64..10.0, c2 in -1.0f64..1.0,
                                    n in 7usize..60, shift in -20i32..20) {
        let y: Vec<f64> = (0..n).map(|i| {
            let x = (i as i32 + shift) as f64;
            c0 + c1 * x + c2 * x * x
        }).collect();
        let s = savgol_smooth(&y, 7, 2).unwrap();
        for (a, b) in s.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn postprocess_idempotent_on_random_curves(values in proptest::collection::vec(30.0f64..80.0, 1..30),
                                               first in -20i64..10, offset in 0.0f64..5.0) {
        let pts: Vec<(i64, f64, String)> = values.iter().enumerate()
            .map(|(i, v)| (first + i as i64, *v, format!("h{i}"))).collect();
        let c = Heatcurve::from_computed(0, 1.0, 20.0, offset, pts);
        let opts = PostprocessOptions::default();
        let once = postprocess(&c, &opts).unwrap();
        prop_assert_eq!(&once, &postprocess(&once, &opts).unwrap());
        prop_assert!(once.points.windows(2).all(|w| w[1].bin == w[0].bin + 1));
    }
}
