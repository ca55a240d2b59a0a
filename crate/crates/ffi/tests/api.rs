use std::ffi::{CStr, CString};
use std::ptr;

use regrade_ffi::*;

fn last_error() -> String {
    let p = rg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn worked_instance() -> *mut RgNodeSet {
    let set = rg_nodeset_new();
    unsafe {
        assert_eq!(rg_nodeset_add_source(set, -1.0, -0.5, 0.2), RgStatus::Ok);
        assert_eq!(rg_nodeset_add_source(set, 0.5, -1.0, 0.6), RgStatus::Ok);
        assert_eq!(rg_nodeset_add_sink(set, -2.0, 1.0, 0.3), RgStatus::Ok);
        assert_eq!(rg_nodeset_add_sink(set, 2.0, 1.0, 0.4), RgStatus::Ok);
    }
    set
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[test]
fn solves_worked_instance() {
    let set = worked_instance();
    let mut plan = ptr::null_mut();
    unsafe {
        assert_eq!(rg_solve_transport(set, &mut plan), RgStatus::Ok);
        let mut obj = 0.0;
        assert_eq!(rg_plan_objective(plan, &mut obj), RgStatus::Ok);
        let expected = 0.2 * dist((-1.0, -0.5), (-2.0, 1.0)) + 0.1 * dist((0.5, -1.0), (-2.0, 1.0)) + 0.4 * dist((0.5, -1.0), (2.0, 1.0));
        assert!((obj - expected).abs() < 1e-9);
        let mut case = RgCase::SinkExcess;
        assert_eq!(rg_plan_case(plan, &mut case), RgStatus::Ok);
        assert_eq!(case, RgCase::SourceExcess);
        let n = rg_plan_move_count(plan);
        assert_eq!(n, 3);
        let mut total = 0.0;
        for i in 0..n {
            let mut m = std::mem::zeroed::<RgMove>();
            assert_eq!(rg_plan_move(plan, i, &mut m), RgStatus::Ok);
            total += m.volume * dist((m.src_x, m.src_y), (m.dst_x, m.dst_y));
        }
        assert!((total - obj).abs() < 1e-12);
        let mut m = std::mem::zeroed::<RgMove>();
        assert_eq!(rg_plan_move(plan, n, &mut m), RgStatus::OutOfRange);
        assert!(last_error().contains("move 3"));

        let mut json = ptr::null_mut();
        assert_eq!(rg_plan_to_json(plan, &mut json), RgStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert!(text.contains("\"case2\""));
        rg_string_free(json);
        rg_plan_free(plan);
        rg_nodeset_free(set);
    }
}

#[test]
fn null_handles_are_reported() {
    unsafe {
        let mut obj = 0.0;
        assert_eq!(rg_plan_objective(ptr::null(), &mut obj), RgStatus::NullPointer);
        assert!(last_error().contains("plan"));
        assert_eq!(rg_plan_move_count(ptr::null()), 0);
        assert_eq!(rg_nodeset_add_source(ptr::null_mut(), 0.0, 0.0, 1.0), RgStatus::NullPointer);
        rg_nodeset_free(ptr::null_mut());
        rg_plan_free(ptr::null_mut());
        rg_heightmap_free(ptr::null_mut());
        rg_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_error() {
    unsafe {
        assert_eq!(rg_plan_objective(ptr::null(), ptr::null_mut()), RgStatus::NullPointer);
        let set = worked_instance();
        rg_nodeset_free(set);
        assert!(rg_last_error().is_null());
    }
}

#[test]
fn rejects_bad_nodes_and_json() {
    let set = rg_nodeset_new();
    unsafe {
        assert_eq!(rg_nodeset_add_sink(set, 0.0, 0.0, -1.0), RgStatus::InvalidArgument);
        assert_eq!(rg_nodeset_add_sink(set, f64::NAN, 0.0, 1.0), RgStatus::InvalidArgument);
        rg_nodeset_free(set);
        let bad = CString::new(r#"{"sources": 3}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(rg_nodeset_from_json(bad.as_ptr(), &mut out), RgStatus::Parse);
        assert!(out.is_null());
        let good = CString::new(r#"{"sources":[{"x":0,"y":0,"v":1}],"sinks":[{"x":1,"y":0,"v":1}]}"#).unwrap();
        assert_eq!(rg_nodeset_from_json(good.as_ptr(), &mut out), RgStatus::Ok);
        let mut plan = ptr::null_mut();
        assert_eq!(rg_solve_transport(out, &mut plan), RgStatus::Ok);
        let mut obj = 0.0;
        rg_plan_objective(plan, &mut obj);
        assert!((obj - 1.0).abs() < 1e-12);
        rg_plan_free(plan);
        rg_nodeset_free(out);
    }
}

#[test]
fn heightmap_metrics_of_ramp() {
    let n = 20;
    let res = 0.1;
    let slope = 1f64.to_radians().tan();
    let heights: Vec<f64> = (0..n * n).map(|i| (i % n) as f64 * res * slope).collect();
    let mut map = ptr::null_mut();
    unsafe {
        assert_eq!(rg_heightmap_from_heights(n, n, res, 0.0, 0.0, heights.as_ptr(), &mut map), RgStatus::Ok);
        let mut m = RgMetrics::default();
        assert_eq!(rg_heightmap_metrics(map, 2.0, 0.01, 5, &mut m), RgStatus::Ok);
        assert!((m.grade_deg - 1.0).abs() < 1e-6);
        assert_eq!(m.area_oos_m2, 0.0);
        assert_eq!(rg_heightmap_metrics(map, 2.0, 0.01, 4, &mut m), RgStatus::InvalidArgument);
        rg_heightmap_free(map);
        let mut bad = ptr::null_mut();
        assert_eq!(rg_heightmap_from_heights(n, n, -1.0, 0.0, 0.0, heights.as_ptr(), &mut bad), RgStatus::InvalidArgument);
    }
}

#[test]
fn heightmap_load_errors() {
    let missing = CString::new("/nonexistent/map.csv").unwrap();
    let txt = CString::new("map.txt").unwrap();
    let mut map = ptr::null_mut();
    unsafe {
        assert_eq!(rg_heightmap_load(missing.as_ptr(), 0.0, 1.0, &mut map), RgStatus::Io);
        assert_eq!(rg_heightmap_load(txt.as_ptr(), 0.0, 1.0, &mut map), RgStatus::InvalidArgument);
    }
    assert!(map.is_null());
}

#[test]
fn simulate_flat_site() {
    let config = CString::new(r#"{"site": {"width": 3, "height": 3, "craters": []}}"#).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(rg_simulate(9, config.as_ptr(), &mut out), RgStatus::Ok);
        let text = CStr::from_ptr(out).to_str().unwrap().to_owned();
        rg_string_free(out);
        assert!(text.contains("\"seed\": 9"));
        assert!(text.contains("\"triplets_executed\": 0"));
        let bad = CString::new(r#"{"site": {"depth": 1}}"#).unwrap();
        assert_eq!(rg_simulate(9, bad.as_ptr(), &mut out), RgStatus::Parse);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(rg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
