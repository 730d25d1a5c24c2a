//! C ABI over `idgs-core`.
//!
//! Every fallible function returns an [`IdgsStatus`] and writes its result
//! through an out-pointer. On failure, [`idgs_last_error`] returns a message
//! for the calling thread. Objects are opaque handles released with their
//! matching `_free` function; strings returned by the library are released
//! with [`idgs_string_free`]. Panics never cross the boundary: they are
//! reported as `IDGS_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use idgs_core::bits::BitString;
use idgs_core::depth::depth_report;
use idgs_core::distributed::{run_idgs, OracleSpec, RunConfig, RunResult};
use idgs_core::error::Error;
use idgs_core::planner::{idgs_plan_with_branch, Branch, IdgsPlan};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdgsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// No phase solution exists for the requested (n, k, p).
    Infeasible = 3,
    /// The run finished without a verified target.
    NotFound = 4,
    Internal = 5,
}

/// Opaque phase plan.
pub struct IdgsPlanHandle(IdgsPlan);

/// Opaque result of a distributed run.
pub struct IdgsRunHandle(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> IdgsStatus {
    match err {
        Error::Infeasible { .. } => IdgsStatus::Infeasible,
        Error::Worker(_) | Error::Integrity(_) => IdgsStatus::Internal,
        _ => IdgsStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IdgsStatus, String)>) -> IdgsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            IdgsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IdgsStatus::Internal
        }
    }
}

fn core<T>(r: Result<T, Error>) -> Result<T, (IdgsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), (IdgsStatus, String)> {
    if p.is_null() {
        Err((IdgsStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message describing the last failed call on this thread, or NULL. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn idgs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn idgs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn idgs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Plan IDGS for `n` input bits, `2^k` nodes and a `p`-bit stage-1 prefix.
/// `mirrored` selects the (−θ, −φ) phase solution.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn idgs_plan_new(
    n: usize,
    k: usize,
    p: usize,
    mirrored: bool,
    out: *mut *mut IdgsPlanHandle,
) -> IdgsStatus {
    guard(|| {
        non_null(out, "out")?;
        let branch = if mirrored { Branch::Mirrored } else { Branch::Positive };
        let plan = core(idgs_plan_with_branch(n, k, p, branch))?;
        unsafe { *out = Box::into_raw(Box::new(IdgsPlanHandle(plan))) };
        Ok(())
    })
}

/// # Safety
/// `plan` must be NULL or a handle from [`idgs_plan_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idgs_plan_free(plan: *mut IdgsPlanHandle) {
    if !plan.is_null() {
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Stage-1 iteration counts `p1` (global) and `p2` (local).
///
/// # Safety
/// `plan` must be a live plan handle; `p1` and `p2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_plan_iterations(plan: *const IdgsPlanHandle, p1: *mut u64, p2: *mut u64) -> IdgsStatus {
    guard(|| {
        non_null(plan, "plan")?;
        non_null(p1, "p1")?;
        non_null(p2, "p2")?;
        let plan = unsafe { &(*plan).0 };
        unsafe {
            *p1 = plan.p1;
            *p2 = plan.p2;
        }
        Ok(())
    })
}

/// Phases `(θ, φ)` of the final generalised iterate.
///
/// # Safety
/// `plan` must be a live plan handle; `theta` and `phi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_plan_phases(plan: *const IdgsPlanHandle, theta: *mut f64, phi: *mut f64) -> IdgsStatus {
    guard(|| {
        non_null(plan, "plan")?;
        non_null(theta, "theta")?;
        non_null(phi, "phi")?;
        let plan = unsafe { &(*plan).0 };
        unsafe {
            *theta = plan.theta;
            *phi = plan.phi;
        }
        Ok(())
    })
}

/// The plan as a JSON object; free with [`idgs_string_free`].
///
/// # Safety
/// `plan` must be a live plan handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_plan_to_json(plan: *const IdgsPlanHandle, out: *mut *mut c_char) -> IdgsStatus {
    guard(|| {
        non_null(plan, "plan")?;
        non_null(out, "out")?;
        let json = serde_json::to_string(unsafe { &(*plan).0 }).map_err(|e| (IdgsStatus::Internal, e.to_string()))?;
        unsafe { *out = owned_string(json) };
        Ok(())
    })
}

/// Run noiseless IDGS on the single-target oracle marking `target` (an
/// MSB-first string of '0'/'1'). Node `i` is seeded with `seed + i`; at
/// most `parallelism` nodes run at once.
///
/// Returns `IDGS_STATUS_OK` and a handle when the run completes, whether or
/// not the target was found; query [`idgs_run_target`] for the outcome.
///
/// # Safety
/// `target` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_run(
    target: *const c_char,
    k: usize,
    p: usize,
    seed: u64,
    parallelism: usize,
    out: *mut *mut IdgsRunHandle,
) -> IdgsStatus {
    guard(|| {
        non_null(target, "target")?;
        non_null(out, "out")?;
        let text = unsafe { CStr::from_ptr(target) }
            .to_str()
            .map_err(|_| (IdgsStatus::InvalidArgument, "target is not UTF-8".to_string()))?;
        let target = core(BitString::parse(text))?;
        let f = core(OracleSpec { n: target.width(), target }.build())?;
        let cfg = RunConfig {
            base_seed: seed,
            parallelism,
            ..RunConfig::new(target.width(), k, p)
        };
        core(cfg.validate())?;
        let result = core(run_idgs(&f, &cfg))?;
        unsafe { *out = Box::into_raw(Box::new(IdgsRunHandle(result))) };
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle from [`idgs_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idgs_run_free(run: *mut IdgsRunHandle) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

/// The verified target as a string (free with [`idgs_string_free`]), or
/// `IDGS_STATUS_NOT_FOUND` with `*out` set to NULL.
///
/// # Safety
/// `run` must be a live run handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_run_target(run: *const IdgsRunHandle, out: *mut *mut c_char) -> IdgsStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        unsafe { *out = ptr::null_mut() };
        match unsafe { &(*run).0 }.outcome.target() {
            Some(t) => {
                unsafe { *out = owned_string(t.to_string()) };
                Ok(())
            }
            None => Err((IdgsStatus::NotFound, "no node produced a verified candidate".into())),
        }
    })
}

/// Plan, node reports and outcome as JSON; free with [`idgs_string_free`].
///
/// # Safety
/// `run` must be a live run handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_run_to_json(run: *const IdgsRunHandle, out: *mut *mut c_char) -> IdgsStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        let json = serde_json::to_string(unsafe { &(*run).0 }).map_err(|e| (IdgsStatus::Internal, e.to_string()))?;
        unsafe { *out = owned_string(json) };
        Ok(())
    })
}

/// Overall circuit depth and the Grover baseline depth for `(n, k, p)`.
///
/// # Safety
/// `overall` and `baseline` must be writable.
#[no_mangle]
pub unsafe extern "C" fn idgs_depth(n: usize, k: usize, p: usize, overall: *mut i64, baseline: *mut i64) -> IdgsStatus {
    guard(|| {
        non_null(overall, "overall")?;
        non_null(baseline, "baseline")?;
        if p == 0 || p + k >= n {
            return Err((IdgsStatus::InvalidArgument, format!("need 1 <= p and p + k < n, got n={n} k={k} p={p}")));
        }
        let r = core(depth_report(n, k, p))?;
        unsafe {
            *overall = r.overall;
            *baseline = r.grover_baseline;
        }
        Ok(())
    })
}
