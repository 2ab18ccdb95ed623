//! Exercise the C entry points exactly as a foreign caller would: through
//! raw pointers, status codes, and the JSON wire format.

use myers_ffi::*;
use std::ffi::{CStr, CString};

const SPHERE_CFG: &str = r#"{
  "manifold": {"kind": "sphere", "radius": 1.0},
  "h": "0.3*z",
  "sde": {"dt": 5e-3, "t_max": 2.0, "n_paths": 400, "seed": 3, "record_stride": 10},
  "spectral": {"resolution": 32, "subdivision": 3}
}"#;

#[test]
fn handle_lifecycle_and_scalar_queries() {
    let cfg = CString::new(SPHERE_CFG).unwrap();
    unsafe {
        let run = myers_run_new_from_json(cfg.as_ptr());
        assert!(!run.is_null(), "handle creation failed");

        let mut lambda0 = f64::NAN;
        assert!(matches!(
            myers_run_lambda0(run, &mut lambda0),
            MyersStatus::Ok
        ));
        assert!(lambda0 < -0.4 && lambda0 > -1.6, "lambda0 = {lambda0}");

        // rho^h at the chart-1 origin (the north pole): 1 + 0.6
        let mut rho = f64::NAN;
        assert!(matches!(
            myers_run_rho_h(run, 1, 0.0, 0.0, &mut rho),
            MyersStatus::Ok
        ));
        assert!((rho - 1.6).abs() < 1e-8, "rho = {rho}");

        let mut vol = f64::NAN;
        assert!(matches!(myers_run_h_volume(run, &mut vol), MyersStatus::Ok));
        assert!(vol > 10.0 && vol < 16.0, "volume = {vol}");

        // out-of-range chart index
        let mut junk = 0.0;
        assert!(matches!(
            myers_run_rho_h(run, 7, 0.0, 0.0, &mut junk),
            MyersStatus::ConfigError
        ));

        myers_run_free(run);
        myers_run_free(std::ptr::null_mut()); // harmless
    }
}

#[test]
fn full_check_returns_parseable_json() {
    let cfg = CString::new(SPHERE_CFG).unwrap();
    unsafe {
        let run = myers_run_new_from_json(cfg.as_ptr());
        assert!(!run.is_null());
        let json_ptr = myers_run_check_json(run);
        assert!(!json_ptr.is_null(), "check failed: {}", last_error());
        let text = CStr::from_ptr(json_ptr).to_str().unwrap().to_owned();
        myers_string_free(json_ptr);
        myers_run_free(run);

        let parsed: serde_json::Value = serde_json::from_str(&text).expect("valid JSON");
        assert_eq!(parsed["criterion_holds"], serde_json::Value::Bool(true));
        assert!(parsed["probes"].as_array().unwrap().len() >= 3);
    }
}

#[test]
fn errors_surface_through_status_and_message() {
    unsafe {
        // null config
        let run = myers_run_new_from_json(std::ptr::null());
        assert!(run.is_null());
        assert!(last_error().contains("null"));

        // bad config: unknown key
        let bad = CString::new(r#"{"manifold": {"kind": "sphere", "radius": 1.0}, "junk": 1}"#)
            .unwrap();
        let run = myers_run_new_from_json(bad.as_ptr());
        assert!(run.is_null());
        assert!(last_error().contains("junk"), "message: {}", last_error());

        // unparsable expression
        let bad = CString::new(
            r#"{"manifold": {"kind": "sphere", "radius": 1.0}, "h": "1+*2"}"#,
        )
        .unwrap();
        let run = myers_run_new_from_json(bad.as_ptr());
        assert!(run.is_null());
        assert!(last_error().contains("syntax"), "message: {}", last_error());

        // null out-pointer
        let cfg = CString::new(SPHERE_CFG).unwrap();
        let run = myers_run_new_from_json(cfg.as_ptr());
        assert!(matches!(
            myers_run_lambda0(run, std::ptr::null_mut()),
            MyersStatus::NullArgument
        ));
        myers_run_free(run);
    }
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(myers_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn last_error() -> String {
    let ptr = myers_last_error_message();
    if ptr.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(ptr) }.to_string_lossy().into_owned()
}
