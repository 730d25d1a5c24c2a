use std::ffi::{CStr, CString};
use std::ptr;

use idgs_ffi::*;

fn take_string(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { idgs_string_free(s) };
    out
}

fn last_error() -> String {
    let e = idgs_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn plan_five_qubits() {
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { idgs_plan_new(5, 1, 2, false, &mut plan) }, IdgsStatus::Ok);
    let (mut p1, mut p2) = (0u64, 0u64);
    assert_eq!(unsafe { idgs_plan_iterations(plan, &mut p1, &mut p2) }, IdgsStatus::Ok);
    assert_eq!((p1, p2), (1, 1));
    let (mut theta, mut phi) = (0.0, 0.0);
    assert_eq!(unsafe { idgs_plan_phases(plan, &mut theta, &mut phi) }, IdgsStatus::Ok);
    assert!((theta - 2.3520).abs() < 1e-3);
    assert!((phi - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { idgs_plan_to_json(plan, &mut json) }, IdgsStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(v["p1"], 1);
    unsafe { idgs_plan_free(plan) };
}

#[test]
fn infeasible_and_invalid_plans() {
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { idgs_plan_new(4, 1, 2, false, &mut plan) }, IdgsStatus::Infeasible);
    assert!(plan.is_null());
    assert!(last_error().contains("infeasible"));
    assert_eq!(unsafe { idgs_plan_new(4, 2, 2, false, &mut plan) }, IdgsStatus::InvalidArgument);
    assert_eq!(unsafe { idgs_plan_new(5, 1, 2, false, ptr::null_mut()) }, IdgsStatus::NullPointer);
}

#[test]
fn run_finds_target() {
    let target = CString::new("111000001111").unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { idgs_run(target.as_ptr(), 1, 3, 7, 2, &mut run) }, IdgsStatus::Ok);
    let mut found = ptr::null_mut();
    assert_eq!(unsafe { idgs_run_target(run, &mut found) }, IdgsStatus::Ok);
    assert_eq!(take_string(found), "111000001111");
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { idgs_run_to_json(run, &mut json) }, IdgsStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    unsafe { idgs_run_free(run) };
}

#[test]
fn run_rejects_bad_target() {
    let target = CString::new("01x00").unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { idgs_run(target.as_ptr(), 1, 2, 0, 1, &mut run) }, IdgsStatus::InvalidArgument);
    assert!(last_error().contains("01x00"));
    assert_eq!(unsafe { idgs_run(ptr::null(), 1, 2, 0, 1, &mut run) }, IdgsStatus::NullPointer);
}

#[test]
fn depth_numbers() {
    let (mut overall, mut baseline) = (0i64, 0i64);
    assert_eq!(unsafe { idgs_depth(12, 1, 3, &mut overall, &mut baseline) }, IdgsStatus::Ok);
    assert_eq!((overall, baseline), (4930, 8918));
    assert_eq!(unsafe { idgs_depth(3, 1, 2, &mut overall, &mut baseline) }, IdgsStatus::InvalidArgument);
}

#[test]
fn version_and_null_frees() {
    let v = unsafe { CStr::from_ptr(idgs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    unsafe {
        idgs_string_free(ptr::null_mut());
        idgs_plan_free(ptr::null_mut());
        idgs_run_free(ptr::null_mut());
    }
}
