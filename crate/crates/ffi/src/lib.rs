//! C ABI for the weightshift library.
//!
//! Strings returned by this library are owned by the caller and must be
//! released with [`ws_string_free`]. Handles are released with their own
//! `*_free` function. On a non-zero status the message is available from
//! [`ws_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde_json::Value;
use weightshift::cli::{run, Command};
use weightshift::exactalg::{Mat, Rat};
use weightshift::io::{parse, RefinementsInput};
use weightshift::refinements::CrysModule;
use weightshift::senlattice::{modify_down, split_sen_poly, SenLattice};
use weightshift::slopes::etale_crys;
use weightshift::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or out-of-range input.
    InputError = 3,
    /// A mathematical hypothesis or gate failed.
    GateError = 4,
    /// `verify` found a failing suite.
    SuiteFailure = 5,
    Internal = 6,
    Panic = 7,
}

/// A crystabelline module with its Hodge flags.
pub struct WsCrysModule {
    inner: CrysModule,
}

/// A rational Sen lattice.
pub struct WsSenLattice {
    inner: SenLattice<Rat>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> WsStatus {
    if matches!(e, Error::Internal(_)) {
        WsStatus::Internal
    } else if e.is_input_error() {
        WsStatus::InputError
    } else {
        WsStatus::GateError
    }
}

fn fail(status: WsStatus, msg: impl Into<String>) -> WsStatus {
    set_error(msg.into());
    status
}

fn lib_fail(e: Error) -> WsStatus {
    fail(status_of(&e), format!("{}: {e}", e.code()))
}

/// Run `f`, turning a panic into [`WsStatus::Panic`].
fn guard(f: impl FnOnce() -> WsStatus) -> WsStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(WsStatus::Panic, "panic inside weightshift"))
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, WsStatus> {
    if p.is_null() {
        return Err(fail(WsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(WsStatus::InvalidUtf8, "argument is not UTF-8"))
}

unsafe fn read_json(p: *const c_char) -> Result<Value, WsStatus> {
    let s = read_str(p)?;
    serde_json::from_str(s).map_err(|e| fail(WsStatus::InputError, format!("parse: {e}")))
}

fn into_c(s: String) -> *mut c_char {
    // Reports never contain interior NULs; fall back to an empty string.
    CString::new(s).unwrap_or_default().into_raw()
}

macro_rules! try_ws {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! try_lib {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return lib_fail(e),
        }
    };
}

/// Run a command on a JSON payload and write the JSON report to `*out_report`.
///
/// The report is written for library errors too; the status mirrors the
/// report's exit code.
///
/// # Safety
/// `command` and `payload_json` must be NUL-terminated strings; `out_report`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_run(
    command: *const c_char,
    payload_json: *const c_char,
    seed: u64,
    out_report: *mut *mut c_char,
) -> WsStatus {
    guard(|| {
        if out_report.is_null() {
            return fail(WsStatus::NullPointer, "null output pointer");
        }
        *out_report = ptr::null_mut();
        let cmd: Command = match try_ws!(read_str(command)).parse() {
            Ok(c) => c,
            Err(e) => return lib_fail(e),
        };
        let payload = try_ws!(read_json(payload_json));
        let report = run(cmd, &payload, seed);
        *out_report = into_c(report.to_json());
        match report.exit_code() {
            0 => WsStatus::Ok,
            code => {
                let e = report.error.as_ref();
                set_error(e.map(|e| format!("{}: {}", e.code, e.message)).unwrap_or_default());
                match code {
                    1 => WsStatus::Internal,
                    2 => WsStatus::InputError,
                    4 => WsStatus::SuiteFailure,
                    _ => WsStatus::GateError,
                }
            }
        }
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ws_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The last error message on this thread, or null. Free with [`ws_string_free`].
#[no_mangle]
pub extern "C" fn ws_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map(into_c).unwrap_or(ptr::null_mut()))
}

/// Build a crystabelline module from a `refinements` payload.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_crys_module_new(spec_json: *const c_char, out: *mut *mut WsCrysModule) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return fail(WsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let v = try_ws!(read_json(spec_json));
        let inp: RefinementsInput = try_lib!(parse(&v));
        let inner = try_lib!(inp.crys().build(&inp.field));
        *out = Box::into_raw(Box::new(WsCrysModule { inner }));
        WsStatus::Ok
    })
}

/// # Safety
/// `m` must come from [`ws_crys_module_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ws_crys_module_free(m: *mut WsCrysModule) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Rank of the module; 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_crys_module_rank(m: *const WsCrysModule) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rank())
}

/// Whether every refinement is non-critical.
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_crys_module_is_noncritical(m: *const WsCrysModule, out: *mut bool) -> WsStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(WsStatus::NullPointer, "null argument");
        };
        *out = try_lib!(m.inner.is_noncritical());
        WsStatus::Ok
    })
}

/// Étaleness verdict of a non-critical module.
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_crys_module_is_etale(m: *const WsCrysModule, out: *mut bool) -> WsStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(WsStatus::NullPointer, "null argument");
        };
        *out = try_lib!(etale_crys(&m.inner)).verdict;
        WsStatus::Ok
    })
}

/// Build a Sen lattice from a JSON square matrix of rationals.
///
/// # Safety
/// `theta_json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_sen_lattice_new(theta_json: *const c_char, out: *mut *mut WsSenLattice) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return fail(WsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let v = try_ws!(read_json(theta_json));
        let theta: Mat<Rat> = try_lib!(parse(&v));
        let inner = try_lib!(SenLattice::new(theta));
        *out = Box::into_raw(Box::new(WsSenLattice { inner }));
        WsStatus::Ok
    })
}

/// # Safety
/// `l` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ws_sen_lattice_free(l: *mut WsSenLattice) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Characteristic polynomial as a JSON array of coefficients, constant first.
///
/// # Safety
/// `l` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_sen_lattice_charpoly(l: *const WsSenLattice, out_json: *mut *mut c_char) -> WsStatus {
    guard(|| {
        let (Some(l), false) = (l.as_ref(), out_json.is_null()) else {
            return fail(WsStatus::NullPointer, "null argument");
        };
        let s = serde_json::to_string(&l.inner.charpoly()).expect("polynomials serialize");
        *out_json = into_c(s);
        WsStatus::Ok
    })
}

/// Lower the lattice along the roots selected by `subset_json` (1-based
/// indices into `roots_json`), producing a new handle.
///
/// # Safety
/// `l` must be a live handle, the strings NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_sen_lattice_modify_down(
    l: *const WsSenLattice,
    roots_json: *const c_char,
    subset_json: *const c_char,
    out: *mut *mut WsSenLattice,
) -> WsStatus {
    guard(|| {
        let (Some(l), false) = (l.as_ref(), out.is_null()) else {
            return fail(WsStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        let roots: Vec<Rat> = try_lib!(parse(&try_ws!(read_json(roots_json))));
        let subset: Vec<usize> = try_lib!(parse(&try_ws!(read_json(subset_json))));
        if subset.contains(&0) {
            return fail(WsStatus::InputError, "subset indices are 1-based");
        }
        let subset: Vec<usize> = subset.iter().map(|i| i - 1).collect();
        let f = try_lib!(split_sen_poly(&l.inner, &roots, &subset));
        let m = try_lib!(modify_down(&l.inner, &f));
        *out = Box::into_raw(Box::new(WsSenLattice { inner: m.lattice }));
        WsStatus::Ok
    })
}
