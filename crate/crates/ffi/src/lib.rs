//! C API over `evfair`.
//!
//! Scenarios and runs are opaque handles owned by the caller and released with
//! their `_free` function. Every fallible call returns an [`EvfStatus`]; on
//! failure the message is available from [`evf_last_error`] on the same thread.
//! Strings returned by the library are freed with [`evf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use evfair::domain::{validate_scenario, FairnessPolicy, Scenario, ScenarioIoError, SolveMode};
use evfair::run::{solve_scenario, Method, ParamOverrides, RunArtifact, RunError, SolveOptions};
use evfair::scenario::{generate, GenConfig};
use evfair::solver::MiqpStatus;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    ValidationError = 5,
    IoError = 6,
    Infeasible = 7,
    SolverError = 8,
    Panic = 9,
}

/// Solver outcome of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvfSolveStatus {
    Optimal = 0,
    Feasible = 1,
    Infeasible = 2,
    NodeLimit = 3,
}

impl From<MiqpStatus> for EvfSolveStatus {
    fn from(s: MiqpStatus) -> Self {
        match s {
            MiqpStatus::Optimal => EvfSolveStatus::Optimal,
            MiqpStatus::Feasible => EvfSolveStatus::Feasible,
            MiqpStatus::Infeasible => EvfSolveStatus::Infeasible,
            MiqpStatus::NodeLimit => EvfSolveStatus::NodeLimit,
        }
    }
}

/// A validated scenario.
pub struct EvfScenario {
    inner: Scenario,
}

/// The result of one solve.
pub struct EvfRun {
    inner: RunArtifact,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(EvfStatus, String);

type Res<T> = Result<T, Fail>;

fn fail<T>(status: EvfStatus, msg: impl Into<String>) -> Res<T> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Res<()>) -> EvfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EvfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EvfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return fail(EvfStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(EvfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Res<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn out_arg<'a, T>(p: *mut *mut T) -> Res<&'a mut *mut T> {
    match p.as_mut() {
        Some(slot) => {
            *slot = ptr::null_mut();
            Ok(slot)
        }
        None => fail(EvfStatus::NullArgument, "output pointer is null"),
    }
}

fn checked(s: Scenario) -> Res<Box<EvfScenario>> {
    let report = validate_scenario(&s);
    if !report.is_valid() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return fail(EvfStatus::ValidationError, msgs.join("; "));
    }
    Ok(Box::new(EvfScenario { inner: s }))
}

/// Parses a scenario from a JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_from_json(json: *const c_char, out: *mut *mut EvfScenario) -> EvfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let text = str_arg(json, "json")?;
        let s = Scenario::from_json_str(text).or_else(|e| fail(EvfStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(checked(s)?);
        Ok(())
    })
}

/// Loads a scenario JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_load(path: *const c_char, out: *mut *mut EvfScenario) -> EvfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let path = str_arg(path, "path")?;
        let s = Scenario::load(path).or_else(|e| {
            let status = match e {
                ScenarioIoError::Read { .. } | ScenarioIoError::Write { .. } => EvfStatus::IoError,
                _ => EvfStatus::ParseError,
            };
            fail(status, e.to_string())
        })?;
        *out = Box::into_raw(checked(s)?);
        Ok(())
    })
}

/// Generates a synthetic scenario.
///
/// `case_name` is `residential` or `shopping`. Pass a negative `n_fixed`,
/// `n_random` or a non-positive `slot_hours` to keep the case default.
///
/// # Safety
/// `case_name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_generate(
    case_name: *const c_char,
    seed: u64,
    n_fixed: i64,
    n_random: i64,
    slot_hours: f64,
    out: *mut *mut EvfScenario,
) -> EvfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let mut cfg = match str_arg(case_name, "case")?.trim().to_ascii_lowercase().as_str() {
            "residential" => GenConfig::residential(seed),
            "shopping" => GenConfig::shopping(seed),
            other => return fail(EvfStatus::InvalidArgument, format!("unknown case '{other}'")),
        };
        if n_fixed >= 0 {
            cfg.n_fixed = n_fixed as usize;
        }
        if n_random >= 0 {
            cfg.n_random = n_random as usize;
        }
        if slot_hours > 0.0 {
            cfg.slot_hours = slot_hours;
        }
        let s = generate(&cfg).or_else(|e| fail(EvfStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(checked(s)?);
        Ok(())
    })
}

/// Sets the operating mode: `charging-only`, `v2g` or `joint`.
///
/// # Safety
/// `scenario` must come from this library; `mode` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_set_mode(scenario: *mut EvfScenario, mode: *const c_char) -> EvfStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or(Fail(EvfStatus::NullArgument, "scenario is null".into()))?;
        let m = SolveMode::parse_flag(str_arg(mode, "mode")?).or_else(|e| fail(EvfStatus::InvalidArgument, e))?;
        s.inner.mode = m;
        Ok(())
    })
}

/// Sets the fairness policy from a flag such as `hard:2.5` or `budget:1,4`.
///
/// # Safety
/// `scenario` must come from this library; `policy` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_set_fairness(scenario: *mut EvfScenario, policy: *const c_char) -> EvfStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or(Fail(EvfStatus::NullArgument, "scenario is null".into()))?;
        let p =
            FairnessPolicy::parse_flag(str_arg(policy, "policy")?).or_else(|e| fail(EvfStatus::InvalidArgument, e))?;
        let mut next = s.inner.clone();
        next.fairness = p;
        s.inner = checked(next)?.inner;
        Ok(())
    })
}

/// Number of EVs, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_ev_count(scenario: *const EvfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.fleet.len())
}

/// Number of time slots, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_slot_count(scenario: *const EvfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.grid.slot_count)
}

/// Serializes the scenario as JSON. Free the result with [`evf_string_free`].
///
/// # Safety
/// `scenario` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_to_json(scenario: *const EvfScenario, out: *mut *mut c_char) -> EvfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s = scenario
            .as_ref()
            .ok_or(Fail(EvfStatus::NullArgument, "scenario is null".into()))?;
        *out = into_c_string(s.inner.to_json_string())?;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evf_scenario_free(scenario: *mut EvfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Solves the scenario under its current mode and fairness policy.
///
/// `method` is `exact`, `heuristic`, `auto` or null for the scenario's own
/// setting. A non-positive `gap_tol` keeps the configured tolerance.
///
/// # Safety
/// `scenario` must come from this library, `method` must be null or a
/// NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evf_solve(
    scenario: *const EvfScenario,
    method: *const c_char,
    gap_tol: f64,
    out: *mut *mut EvfRun,
) -> EvfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s = scenario
            .as_ref()
            .ok_or(Fail(EvfStatus::NullArgument, "scenario is null".into()))?;
        let method = match opt_str_arg(method, "method")? {
            Some(m) => Some(m.parse::<Method>().or_else(|e| fail(EvfStatus::InvalidArgument, e))?),
            None => None,
        };
        let overrides = ParamOverrides {
            method,
            gap_tol: (gap_tol > 0.0).then_some(gap_tol),
            ..ParamOverrides::default()
        };
        let opts =
            SolveOptions::resolve(&s.inner, &overrides).or_else(|e| fail(EvfStatus::InvalidArgument, e.to_string()))?;
        let art = solve_scenario(&s.inner, &opts).map_err(|e| {
            let status = match &e {
                e if e.is_infeasible() => EvfStatus::Infeasible,
                RunError::Model(_) | RunError::Config(_) => EvfStatus::ValidationError,
                _ => EvfStatus::SolverError,
            };
            Fail(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(EvfRun { inner: art }));
        Ok(())
    })
}

/// Solver outcome, `Infeasible` for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_run_status(run: *const EvfRun) -> EvfSolveStatus {
    run.as_ref()
        .map_or(EvfSolveStatus::Infeasible, |r| r.inner.record.status.into())
}

/// Objective value, NaN for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_run_objective(run: *const EvfRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.inner.record.objective)
}

/// Relative optimality gap, NaN for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_run_rel_gap(run: *const EvfRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.inner.record.rel_gap)
}

/// Fleet total cost from the per-EV breakdown, NaN for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_run_total_cost(run: *const EvfRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.inner.record.cost.total_cost)
}

/// Jain's fairness index of V2V participation, NaN for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_run_jfi(run: *const EvfRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.inner.fairness.jfi)
}

/// Whether the independent feasibility audit passed.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn evf_run_audit_pass(run: *const EvfRun) -> bool {
    run.as_ref().is_some_and(|r| r.inner.audit.pass)
}

/// Serializes the run (record, schedule, fairness and audit) as JSON.
/// Free the result with [`evf_string_free`].
///
/// # Safety
/// `run` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evf_run_to_json(run: *const EvfRun, out: *mut *mut c_char) -> EvfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let r = run
            .as_ref()
            .ok_or(Fail(EvfStatus::NullArgument, "run is null".into()))?;
        let text = serde_json::to_string_pretty(&r.inner).or_else(|e| fail(EvfStatus::SolverError, e.to_string()))?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// # Safety
/// `run` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evf_run_free(run: *mut EvfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

fn into_c_string(s: String) -> Res<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(EvfStatus::SolverError, "string contains NUL"))
}

/// # Safety
/// `s` must be null or a string returned by this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn evf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn evf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
