use std::ffi::{CStr, CString};
use std::ptr;

use hydro_ldr_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = hldr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn micro_round_trip() {
    unsafe {
        let mut system = ptr::null_mut();
        assert_eq!(hldr_system_fixture(c("micro").as_ptr(), &mut system), HldrStatus::Ok);
        assert_eq!(hldr_system_horizon(system), 2);
        assert_eq!(hldr_system_n_hydros(system), 1);

        let mut scenarios = ptr::null_mut();
        let status = hldr_scenarios_generate(c("fixture:micro").as_ptr(), 1, 2, 0, 7, &mut scenarios);
        assert_eq!(status, HldrStatus::Ok);
        assert_eq!(hldr_scenarios_count(scenarios), 1);

        let mut policy = ptr::null_mut();
        let mut objective = 0.0;
        let status = hldr_estimate(system, scenarios, 1, 0, false, 0.0, ptr::null(), &mut policy, &mut objective);
        assert_eq!(status, HldrStatus::Ok, "{}", last_error());
        assert!((objective - 4640.0).abs() < 1e-6, "{objective}");

        let n = hldr_policy_n_coefficients(policy);
        assert_eq!(n, 4);
        let mut theta = vec![0.0; n];
        let mut written = 0;
        assert_eq!(hldr_policy_theta(policy, theta.as_mut_ptr(), n, &mut written), HldrStatus::Ok);
        assert_eq!(written, n);

        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("theta_l0.csv").to_str().unwrap());
        assert_eq!(hldr_policy_save(policy, path.as_ptr()), HldrStatus::Ok);
        let mut reloaded = ptr::null_mut();
        assert_eq!(hldr_policy_load(path.as_ptr(), &mut reloaded), HldrStatus::Ok);
        assert_eq!(hldr_policy_n_coefficients(reloaded), n);

        let mut sim = ptr::null_mut();
        assert_eq!(hldr_simulate(system, reloaded, scenarios, 0.0, &mut sim), HldrStatus::Ok, "{}", last_error());
        assert!((hldr_simulation_mean_cost(sim) - 4640.0).abs() < 1e-6);
        let mut cost = 0.0;
        assert_eq!(hldr_simulation_cost(sim, 0, &mut cost), HldrStatus::Ok);
        assert_eq!(cost, hldr_simulation_mean_cost(sim));
        let mut price = 0.0;
        assert_eq!(hldr_simulation_spot(sim, 0, 1, 0, &mut price), HldrStatus::Ok);
        assert!(price.is_finite());
        assert_eq!(hldr_simulation_spot(sim, 0, 3, 0, &mut price), HldrStatus::InvalidArgument);

        hldr_simulation_free(sim);
        hldr_policy_free(reloaded);
        hldr_policy_free(policy);
        hldr_scenarios_free(scenarios);
        hldr_system_free(system);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut system = ptr::null_mut();
        assert_eq!(hldr_system_load(ptr::null(), &mut system), HldrStatus::InvalidArgument);
        assert!(last_error().contains("path"));

        assert_eq!(hldr_system_fixture(c("case9").as_ptr(), &mut system), HldrStatus::Config);
        assert!(last_error().contains("case9"));

        assert_eq!(hldr_system_load(c("/nonexistent/system.toml").as_ptr(), &mut system), HldrStatus::Io);
        assert!(system.is_null());

        let mut policy = ptr::null_mut();
        let status = hldr_estimate(ptr::null(), ptr::null(), 1, 0, false, 0.0, ptr::null(), &mut policy, ptr::null_mut());
        assert_eq!(status, HldrStatus::InvalidArgument);
    }
}

#[test]
fn positive_lambda_needs_baseline() {
    unsafe {
        let mut system = ptr::null_mut();
        hldr_system_fixture(c("micro").as_ptr(), &mut system);
        let mut scenarios = ptr::null_mut();
        hldr_scenarios_generate(c("fixture:micro").as_ptr(), 1, 2, 0, 7, &mut scenarios);
        let mut policy = ptr::null_mut();
        let status = hldr_estimate(system, scenarios, 1, 0, false, 10.0, ptr::null(), &mut policy, ptr::null_mut());
        assert_eq!(status, HldrStatus::InvalidArgument);
        assert!(last_error().contains("baseline"));
        hldr_scenarios_free(scenarios);
        hldr_system_free(system);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        hldr_system_free(ptr::null_mut());
        hldr_scenarios_free(ptr::null_mut());
        hldr_policy_free(ptr::null_mut());
        hldr_simulation_free(ptr::null_mut());
    }
    assert_eq!(unsafe { hldr_system_horizon(ptr::null()) }, 0);
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(hldr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hydro_ldr.h")).unwrap();
    for symbol in [
        "typedef struct HldrSystem HldrSystem",
        "HLDR_STATUS_LP",
        "hldr_estimate",
        "hldr_simulate",
        "hldr_last_error",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
