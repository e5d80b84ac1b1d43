use std::ffi::{CStr, CString};
use std::ptr;

use evfair_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = evf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small() -> *mut EvfScenario {
    let mut s = ptr::null_mut();
    let st = unsafe { evf_scenario_generate(c("residential").as_ptr(), 3, 2, 3, 2.0, &mut s) };
    assert_eq!(st, EvfStatus::Ok);
    s
}

#[test]
fn generate_solve_and_read_back() {
    let s = small();
    unsafe {
        assert_eq!(evf_scenario_ev_count(s), 5);
        assert_eq!(evf_scenario_slot_count(s), 12);
        assert_eq!(evf_scenario_set_fairness(s, c("hard:2").as_ptr()), EvfStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(evf_solve(s, c("exact").as_ptr(), 0.0, &mut run), EvfStatus::Ok);
        assert_eq!(evf_run_status(run), EvfSolveStatus::Optimal);
        assert!(evf_run_audit_pass(run));
        let (obj, cost) = (evf_run_objective(run), evf_run_total_cost(run));
        assert!((obj - cost).abs() < 1e-6);
        let jfi = evf_run_jfi(run);
        assert!(jfi > 0.0 && jfi <= 1.0);

        let mut json = ptr::null_mut();
        assert_eq!(evf_run_to_json(run, &mut json), EvfStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["record"]["fairness"]["type"], "hard_per_slot");
        evf_string_free(json);
        evf_run_free(run);
        evf_scenario_free(s);
    }
}

#[test]
fn json_round_trip_keeps_the_fingerprint() {
    let s = small();
    unsafe {
        let mut json = ptr::null_mut();
        assert_eq!(evf_scenario_to_json(s, &mut json), EvfStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(evf_scenario_from_json(json, &mut back), EvfStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(evf_scenario_to_json(back, &mut again), EvfStatus::Ok);
        assert_eq!(CStr::from_ptr(json), CStr::from_ptr(again));
        evf_string_free(json);
        evf_string_free(again);
        evf_scenario_free(back);
        evf_scenario_free(s);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(
            evf_scenario_from_json(c("{not json").as_ptr(), &mut s),
            EvfStatus::ParseError
        );
        assert!(s.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(evf_scenario_from_json(ptr::null(), &mut s), EvfStatus::NullArgument);
        assert_eq!(
            evf_scenario_from_json(c("{}").as_ptr(), ptr::null_mut()),
            EvfStatus::NullArgument
        );

        assert_eq!(
            evf_scenario_load(c("/nonexistent.json").as_ptr(), &mut s),
            EvfStatus::IoError
        );
        assert!(last_error().contains("/nonexistent.json"));

        assert_eq!(
            evf_scenario_generate(c("airport").as_ptr(), 1, -1, -1, 0.0, &mut s),
            EvfStatus::InvalidArgument
        );

        let s = small();
        assert_eq!(
            evf_scenario_set_mode(s, c("teleport").as_ptr()),
            EvfStatus::InvalidArgument
        );
        assert_eq!(
            evf_scenario_set_fairness(s, c("hard:-1").as_ptr()),
            EvfStatus::InvalidArgument
        );
        let mut run = ptr::null_mut();
        assert_eq!(
            evf_solve(s, c("simplex").as_ptr(), 0.0, &mut run),
            EvfStatus::InvalidArgument
        );
        assert!(run.is_null());

        // a successful call clears the previous message
        assert_eq!(evf_scenario_set_mode(s, c("v2g").as_ptr()), EvfStatus::Ok);
        assert!(evf_last_error().is_null());
        evf_scenario_free(s);
    }
}

#[test]
fn unreachable_target_reports_infeasible() {
    let s = small();
    unsafe {
        let mut json = ptr::null_mut();
        assert_eq!(evf_scenario_to_json(s, &mut json), EvfStatus::Ok);
        let mut v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        evf_string_free(json);
        evf_scenario_free(s);
        // one slot of charging cannot lift a half-empty battery to full
        let ev = &mut v["fleet"][0];
        ev["departure"] = ev["arrival"].clone();
        ev["target_kwh"] = ev["capacity_kwh"].clone();
        let text = c(&v.to_string());
        let mut s = ptr::null_mut();
        assert_eq!(evf_scenario_from_json(text.as_ptr(), &mut s), EvfStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(evf_solve(s, ptr::null(), 0.0, &mut run), EvfStatus::Infeasible);
        assert!(run.is_null());
        evf_scenario_free(s);
    }
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        assert_eq!(evf_scenario_ev_count(ptr::null()), 0);
        assert!(evf_run_objective(ptr::null()).is_nan());
        assert!(!evf_run_audit_pass(ptr::null()));
        evf_scenario_free(ptr::null_mut());
        evf_run_free(ptr::null_mut());
        evf_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(evf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
