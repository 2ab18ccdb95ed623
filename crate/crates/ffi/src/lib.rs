//! C ABI for the myers library. A run handle is created from the same JSON
//! configuration the CLI takes; results come back as JSON strings or plain
//! doubles. Every entry point returns a status code (or null) on failure
//! and stores a message retrievable with `myers_last_error_message`.
//!
//! Handles are not thread-safe; use one handle per thread. Strings
//! returned by the library must be released with `myers_string_free`.

use myers_core::config::{parse_config_str, RunSetup};
use myers_core::criterion::check;
use myers_core::geometry::{h_volume, rho_h, Point};
use myers_core::spectral::{build_operator, top_eigen};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

/// Status codes returned by the C entry points.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum MyersStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    NumericalError = 4,
}

/// Opaque run handle: a validated manifold + potential + numeric settings.
pub struct MyersRun {
    setup: RunSetup,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Message for the most recent failure on this thread, or null. The
/// pointer is valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn myers_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Build a run handle from a JSON configuration (same schema as the CLI).
/// Returns null on error.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated C string or null.
#[no_mangle]
pub unsafe extern "C" fn myers_run_new_from_json(config_json: *const c_char) -> *mut MyersRun {
    clear_error();
    if config_json.is_null() {
        set_error("config_json is null");
        return std::ptr::null_mut();
    }
    let text = match unsafe { CStr::from_ptr(config_json) }.to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config_json is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    let setup = parse_config_str(text, "<ffi config>").and_then(|f| f.build());
    match setup {
        Ok(setup) => Box::into_raw(Box::new(MyersRun { setup })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a run handle. Null is ignored.
///
/// # Safety
/// `run` must have come from `myers_run_new_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn myers_run_free(run: *mut MyersRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by a myers_* function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn myers_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Run the full criterion check and return the report as a JSON string
/// (caller frees with `myers_string_free`). Returns null on error.
///
/// # Safety
/// `run` must be a live handle from `myers_run_new_from_json`.
#[no_mangle]
pub unsafe extern "C" fn myers_run_check_json(run: *mut MyersRun) -> *mut c_char {
    clear_error();
    let Some(run) = (unsafe { run.as_ref() }) else {
        set_error("run handle is null");
        return std::ptr::null_mut();
    };
    match check(&run.setup.model, &run.setup.h, &run.setup.check) {
        Ok(report) => {
            let json = report.to_json().render();
            CString::new(json)
                .map(CString::into_raw)
                .unwrap_or(std::ptr::null_mut())
        }
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Criterion eigenvalue lambda0 of the configured model (spectral engine
/// only; no Monte Carlo).
///
/// # Safety
/// `run` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn myers_run_lambda0(run: *mut MyersRun, out: *mut f64) -> MyersStatus {
    clear_error();
    let Some(run) = (unsafe { run.as_ref() }) else {
        set_error("run handle is null");
        return MyersStatus::NullArgument;
    };
    if out.is_null() {
        set_error("out is null");
        return MyersStatus::NullArgument;
    }
    let op = match build_operator(
        &run.setup.model,
        &run.setup.h,
        run.setup.check.resolution,
        run.setup.check.subdivision,
        run.setup.check.rho_shift,
    ) {
        Ok(op) => op,
        Err(e) => {
            set_error(&e.to_string());
            return MyersStatus::NumericalError;
        }
    };
    match top_eigen(&op) {
        Ok(eig) => {
            unsafe { *out = eig.lambda0 };
            MyersStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            MyersStatus::NumericalError
        }
    }
}

/// Curvature floor rho^h at a chart point.
///
/// # Safety
/// `run` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn myers_run_rho_h(
    run: *mut MyersRun,
    chart: u32,
    u: f64,
    v: f64,
    out: *mut f64,
) -> MyersStatus {
    clear_error();
    let Some(run) = (unsafe { run.as_ref() }) else {
        set_error("run handle is null");
        return MyersStatus::NullArgument;
    };
    if out.is_null() {
        set_error("out is null");
        return MyersStatus::NullArgument;
    }
    if chart as usize >= run.setup.model.n_charts() {
        set_error("chart index out of range");
        return MyersStatus::ConfigError;
    }
    let p = Point::new(chart as usize, u, v);
    match rho_h(&run.setup.model, &run.setup.h, &p) {
        Ok(val) => {
            unsafe { *out = val };
            MyersStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            MyersStatus::NumericalError
        }
    }
}

/// Weighted volume of the configured manifold at the configured resolution.
///
/// # Safety
/// `run` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn myers_run_h_volume(run: *mut MyersRun, out: *mut f64) -> MyersStatus {
    clear_error();
    let Some(run) = (unsafe { run.as_ref() }) else {
        set_error("run handle is null");
        return MyersStatus::NullArgument;
    };
    if out.is_null() {
        set_error("out is null");
        return MyersStatus::NullArgument;
    }
    match h_volume(&run.setup.model, &run.setup.h, run.setup.check.resolution) {
        Ok(val) => {
            unsafe { *out = val };
            MyersStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            MyersStatus::NumericalError
        }
    }
}

/// Library version as a static string (do not free).
#[no_mangle]
pub extern "C" fn myers_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
