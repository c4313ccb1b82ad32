//! C ABI over the observer toolkit.
//!
//! Every handle is opaque and owned by the caller, who releases it with the
//! matching `*_free`. Fallible calls return a [`BlsmoStatus`]; the message of
//! the last failure on the calling thread is available from
//! [`blsmo_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use blsmo::error::exit_code;
use blsmo::pipeline::{self, RunOutcome};
use blsmo::scenario::{self, ScenarioConfig};
use blsmo::synthesis::SynthesisResult;

/// Status codes; the non-zero library codes equal the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlsmoStatus {
    Ok = 0,
    Config = 1,
    Infeasible = 2,
    Model = 3,
    Solver = 4,
    Simulation = 5,
    Reconstruction = 6,
    Io = 7,
    NullPointer = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

impl BlsmoStatus {
    fn from_error(e: &blsmo::Error) -> Self {
        match e.exit_code() {
            exit_code::CONFIG => Self::Config,
            exit_code::INFEASIBLE => Self::Infeasible,
            exit_code::MODEL => Self::Model,
            exit_code::SOLVER => Self::Solver,
            exit_code::SIMULATION => Self::Simulation,
            exit_code::RECONSTRUCTION => Self::Reconstruction,
            _ => Self::Io,
        }
    }
}

/// A scenario configuration.
pub struct BlsmoScenario(ScenarioConfig);

/// Synthesized observer gains with their diagnostics.
pub struct BlsmoGains(SynthesisResult);

/// A finished simulation with metrics.
pub struct BlsmoRun(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: BlsmoStatus, msg: impl Into<String>) -> BlsmoStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), BlsmoStatus>) -> BlsmoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlsmoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(BlsmoStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: blsmo::Error) -> BlsmoStatus {
    fail(BlsmoStatus::from_error(&e), e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, BlsmoStatus> {
    if s.is_null() {
        return Err(fail(BlsmoStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(BlsmoStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, BlsmoStatus> {
    p.as_ref()
        .ok_or_else(|| fail(BlsmoStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(out: *mut *mut T) -> Result<(), BlsmoStatus> {
    if out.is_null() {
        Err(fail(BlsmoStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn blsmo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn blsmo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a built-in scenario (`"example1"`, `"example2"`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blsmo_scenario_builtin(name: *const c_char, out: *mut *mut BlsmoScenario) -> BlsmoStatus {
    guard(|| {
        check_out(out)?;
        let c = scenario::builtin(read_str(name)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlsmoScenario(c)));
        Ok(())
    })
}

/// Parses a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blsmo_scenario_from_json(json: *const c_char, out: *mut *mut BlsmoScenario) -> BlsmoStatus {
    guard(|| {
        check_out(out)?;
        let c = ScenarioConfig::from_json(read_str(json)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlsmoScenario(c)));
        Ok(())
    })
}

/// Scenario as JSON; release with [`blsmo_string_free`]. Null on failure.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn blsmo_scenario_to_json(scenario: *const BlsmoScenario) -> *mut c_char {
    let Ok(s) = deref(scenario, "scenario") else {
        return ptr::null_mut();
    };
    match s.0.to_json() {
        Ok(j) => into_c_string(j),
        Err(e) => {
            lib_err(e);
            ptr::null_mut()
        }
    }
}

/// Overrides the simulated span and integrator step.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn blsmo_scenario_set_span(
    scenario: *mut BlsmoScenario,
    t0: f64,
    tf: f64,
    step: f64,
) -> BlsmoStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or_else(|| fail(BlsmoStatus::NullPointer, "scenario is null"))?;
        let mut c = s.0.clone();
        c.simulation.t_span = [t0, tf];
        c.simulation.step = step;
        c.validate().map_err(lib_err)?;
        s.0 = c;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blsmo_scenario_free(scenario: *mut BlsmoScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Solves the synthesis LMIs. `BLSMO_STATUS_INFEASIBLE` when no gains exist.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blsmo_synthesize(scenario: *const BlsmoScenario, out: *mut *mut BlsmoGains) -> BlsmoStatus {
    guard(|| {
        check_out(out)?;
        let s = deref(scenario, "scenario")?;
        let r = pipeline::synthesize(&s.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlsmoGains(r)));
        Ok(())
    })
}

/// Scalar results of a synthesis; any output pointer may be null.
///
/// # Safety
/// `gains` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn blsmo_gains_summary(
    gains: *const BlsmoGains,
    mu: *mut f64,
    lambda1: *mut f64,
    bound: *mut f64,
) -> BlsmoStatus {
    guard(|| {
        let g = &deref(gains, "gains")?.0;
        for (p, v) in [(mu, g.gains.mu), (lambda1, g.lambda1), (bound, g.ultimate_bound)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Gains and diagnostics as JSON; release with [`blsmo_string_free`].
///
/// # Safety
/// `gains` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn blsmo_gains_to_json(gains: *const BlsmoGains) -> *mut c_char {
    let Ok(g) = deref(gains, "gains") else {
        return ptr::null_mut();
    };
    match g.0.to_json() {
        Ok(j) => into_c_string(j),
        Err(e) => {
            lib_err(e);
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `gains` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blsmo_gains_free(gains: *mut BlsmoGains) {
    if !gains.is_null() {
        drop(Box::from_raw(gains));
    }
}

/// Simulates and reconstructs. `gains` may be null, in which case the gains
/// are synthesized first.
///
/// # Safety
/// `scenario` must be a live handle, `gains` null or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn blsmo_run(
    scenario: *const BlsmoScenario,
    gains: *const BlsmoGains,
    out: *mut *mut BlsmoRun,
) -> BlsmoStatus {
    guard(|| {
        check_out(out)?;
        let s = deref(scenario, "scenario")?;
        let g = gains.as_ref().map(|g| g.0.gains.clone());
        let o = pipeline::run(&s.0, g).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlsmoRun(o)));
        Ok(())
    })
}

/// Trailing-window sup of the estimation error and its bound.
///
/// # Safety
/// `run` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn blsmo_run_terminal_error(
    run: *const BlsmoRun,
    error: *mut f64,
    bound: *mut f64,
) -> BlsmoStatus {
    guard(|| {
        let m = &deref(run, "run")?.0.metrics.error;
        if let Some(p) = error.as_mut() {
            *p = m.terminal_sup_error;
        }
        if let Some(p) = bound.as_mut() {
            *p = m.bound;
        }
        Ok(())
    })
}

/// Number of recorded samples; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blsmo_run_len(run: *const BlsmoRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.trace.len())
}

/// Copies sample times and `|e_bar|` into caller buffers of length `len`,
/// which must equal [`blsmo_run_len`]. Either buffer may be null.
///
/// # Safety
/// Non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn blsmo_run_copy_error(
    run: *const BlsmoRun,
    t: *mut f64,
    e_norm: *mut f64,
    len: usize,
) -> BlsmoStatus {
    guard(|| {
        let tr = &deref(run, "run")?.0.trace;
        if len != tr.len() {
            return Err(fail(
                BlsmoStatus::Config,
                format!("buffer length {len}, trace has {} samples", tr.len()),
            ));
        }
        if !t.is_null() {
            std::slice::from_raw_parts_mut(t, len).copy_from_slice(&tr.t);
        }
        if !e_norm.is_null() {
            let dst = std::slice::from_raw_parts_mut(e_norm, len);
            for (i, d) in dst.iter_mut().enumerate() {
                *d = tr.e_bar(i).norm();
            }
        }
        Ok(())
    })
}

/// Run metrics as JSON; release with [`blsmo_string_free`].
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn blsmo_run_metrics_json(run: *const BlsmoRun) -> *mut c_char {
    let Ok(r) = deref(run, "run") else {
        return ptr::null_mut();
    };
    match serde_json::to_string_pretty(&r.0.metrics) {
        Ok(j) => into_c_string(j),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blsmo_run_free(run: *mut BlsmoRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blsmo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
