//! C ABI over `hydro-ldr`.
//!
//! Objects cross the boundary as opaque handles created by `hldr_*_load`,
//! `hldr_*_generate`, `hldr_estimate` or `hldr_simulate` and released with
//! the matching `hldr_*_free`. Every fallible call returns an
//! [`HldrStatus`]; on failure the message is kept per thread and read with
//! [`hldr_last_error`]. Panics never unwind into C: they surface as
//! `HLDR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hydro_ldr::basis::BasisConfig;
use hydro_ldr::estimator::{adalasso_weights, estimate, LdrPolicy};
use hydro_ldr::scenario::{generate, ScenarioSet, ScenarioSpec};
use hydro_ldr::stt::{simulate, SimulationResult, SttConfig};
use hydro_ldr::system::HydroSystem;
use hydro_ldr::{fixtures, Error};

/// Result of every fallible call. Values 2 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HldrStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or out-of-range index.
    InvalidArgument = 1,
    /// Invalid configuration or data.
    Config = 2,
    /// The LP solver failed or reported infeasibility.
    Lp = 3,
    Io = 4,
    Panic = 5,
}

pub struct HldrSystem {
    inner: HydroSystem,
}

pub struct HldrScenarios {
    inner: ScenarioSet,
}

pub struct HldrPolicy {
    inner: LdrPolicy,
}

pub struct HldrSimulation {
    inner: SimulationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Argument(String),
    Library(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

fn status_of(e: &Error) -> HldrStatus {
    match e.exit_code() {
        3 => HldrStatus::Lp,
        4 => HldrStatus::Io,
        _ => HldrStatus::Config,
    }
}

/// Runs `body`, translating errors and panics into a status code.
fn guard<F>(body: F) -> HldrStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HldrStatus::Ok,
        Ok(Err(Failure::Argument(m))) => {
            set_last_error(m);
            HldrStatus::InvalidArgument
        }
        Ok(Err(Failure::Library(e))) => {
            let status = status_of(&e);
            set_last_error(e.to_string());
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            HldrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Argument(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Argument(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::Argument(format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Argument("output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hldr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hldr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a system file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_system_load(path: *const c_char, out: *mut *mut HldrSystem) -> HldrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let inner = HydroSystem::load(Path::new(path))?;
        inner.validate()?;
        put(out, HldrSystem { inner })
    })
}

/// Loads the system of a bundled fixture (`case1`, `case2`, `micro`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_system_fixture(name: *const c_char, out: *mut *mut HldrSystem) -> HldrStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        put(out, HldrSystem { inner: fixtures::load(name)?.system })
    })
}

/// # Safety
/// `system` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hldr_system_free(system: *mut HldrSystem) {
    free(system)
}

/// Number of stages, or 0 for a null handle.
///
/// # Safety
/// `system` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hldr_system_horizon(system: *const HldrSystem) -> usize {
    system.as_ref().map_or(0, |s| s.inner.horizon)
}

/// Number of reservoirs, or 0 for a null handle.
///
/// # Safety
/// `system` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hldr_system_n_hydros(system: *const HldrSystem) -> usize {
    system.as_ref().map_or(0, |s| s.inner.n_hydros())
}

/// Loads a scenario CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_scenarios_load(path: *const c_char, out: *mut *mut HldrScenarios) -> HldrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, HldrScenarios { inner: ScenarioSet::load_csv(Path::new(path))? })
    })
}

/// Draws `n` scenarios from a scenario spec file, or from the spec of a
/// bundled fixture when `spec` is `fixture:<name>`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_scenarios_generate(
    spec: *const c_char,
    n: usize,
    horizon: usize,
    max_lag: usize,
    seed: u64,
    out: *mut *mut HldrScenarios,
) -> HldrStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        let spec = match spec.strip_prefix("fixture:") {
            Some(name) => fixtures::load(name)?.scenarios,
            None => ScenarioSpec::load(Path::new(spec))?,
        };
        put(out, HldrScenarios { inner: generate(&spec, n, horizon, max_lag, seed)? })
    })
}

/// Writes a scenario CSV.
///
/// # Safety
/// `scenarios` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hldr_scenarios_save(scenarios: *const HldrScenarios, path: *const c_char) -> HldrStatus {
    guard(|| {
        let s = ref_arg(scenarios, "scenarios")?;
        let path = str_arg(path, "path")?;
        s.inner.save_csv(Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `scenarios` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hldr_scenarios_free(scenarios: *mut HldrScenarios) {
    free(scenarios)
}

/// Number of scenarios, or 0 for a null handle.
///
/// # Safety
/// `scenarios` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hldr_scenarios_count(scenarios: *const HldrScenarios) -> usize {
    scenarios.as_ref().map_or(0, |s| s.inner.n_scenarios())
}

/// Estimates a policy. With `lambda > 0`, `baseline` must be the λ = 0
/// policy that defines the adaptive weights; it is ignored otherwise.
/// `objective` receives the LP objective when non-null.
///
/// # Safety
/// Handles must be live (`baseline` may be null when `lambda == 0`);
/// `out` must be writable; `objective` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_estimate(
    system: *const HldrSystem,
    scenarios: *const HldrScenarios,
    max_degree: usize,
    max_lag: usize,
    include_complement: bool,
    lambda: f64,
    baseline: *const HldrPolicy,
    out: *mut *mut HldrPolicy,
    objective: *mut f64,
) -> HldrStatus {
    guard(|| {
        let system = ref_arg(system, "system")?;
        let scenarios = ref_arg(scenarios, "scenarios")?;
        let weights = if lambda > 0.0 {
            Some(adalasso_weights(&ref_arg(baseline, "baseline")?.inner))
        } else {
            None
        };
        let basis = BasisConfig::new(max_degree, max_lag, include_complement);
        let est = estimate(&system.inner, &scenarios.inner, &basis, lambda, weights.as_ref())?;
        if !objective.is_null() {
            *objective = est.objective;
        }
        put(out, HldrPolicy { inner: est.policy })
    })
}

/// Loads a policy CSV and its JSON sidecar.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_policy_load(path: *const c_char, out: *mut *mut HldrPolicy) -> HldrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, HldrPolicy { inner: LdrPolicy::load(Path::new(path))? })
    })
}

/// Writes a policy CSV and its JSON sidecar.
///
/// # Safety
/// `policy` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hldr_policy_save(policy: *const HldrPolicy, path: *const c_char) -> HldrStatus {
    guard(|| {
        let p = ref_arg(policy, "policy")?;
        let path = str_arg(path, "path")?;
        p.inner.save(Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hldr_policy_free(policy: *mut HldrPolicy) {
    free(policy)
}

/// Total coefficient count, or 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hldr_policy_n_coefficients(policy: *const HldrPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.inner.theta.len())
}

/// Non-intercept coefficients above the zero tolerance, or 0 for a null
/// handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hldr_policy_nonzero_count(policy: *const HldrPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.inner.nonzero_count())
}

/// Copies up to `len` coefficients, in canonical index order, into `buf`
/// and stores the total count in `written`.
///
/// # Safety
/// `policy` must be live; `buf` must hold `len` doubles; `written` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_policy_theta(
    policy: *const HldrPolicy,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> HldrStatus {
    guard(|| {
        let p = ref_arg(policy, "policy")?;
        if written.is_null() || (buf.is_null() && len > 0) {
            return Err(Failure::Argument("output buffer is null".into()));
        }
        let theta = &p.inner.theta;
        let n = theta.len().min(len);
        if n > 0 {
            ptr::copy_nonoverlapping(theta.as_ptr(), buf, n);
        }
        *written = theta.len();
        Ok(())
    })
}

/// Simulates a policy over every scenario. `gamma <= 0` selects the default
/// tracking penalty.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_simulate(
    system: *const HldrSystem,
    policy: *const HldrPolicy,
    scenarios: *const HldrScenarios,
    gamma: f64,
    out: *mut *mut HldrSimulation,
) -> HldrStatus {
    guard(|| {
        let system = ref_arg(system, "system")?;
        let policy = ref_arg(policy, "policy")?;
        let scenarios = ref_arg(scenarios, "scenarios")?;
        let config = SttConfig {
            gamma: (gamma > 0.0).then_some(gamma),
            ..SttConfig::default()
        };
        put(out, HldrSimulation { inner: simulate(&system.inner, &policy.inner, &scenarios.inner, &config)? })
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hldr_simulation_free(sim: *mut HldrSimulation) {
    free(sim)
}

/// Mean discounted cost, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hldr_simulation_mean_cost(sim: *const HldrSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.inner.z_m)
}

/// Discounted cost of scenario `s` (0-based).
///
/// # Safety
/// `sim` must be live; `cost` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_simulation_cost(sim: *const HldrSimulation, s: usize, cost: *mut f64) -> HldrStatus {
    guard(|| {
        let sim = ref_arg(sim, "simulation")?;
        let c = sim
            .inner
            .scenario_costs
            .get(s)
            .ok_or_else(|| Failure::Argument(format!("scenario {s} out of range")))?;
        if cost.is_null() {
            return Err(Failure::Argument("cost is null".into()));
        }
        *cost = *c;
        Ok(())
    })
}

/// Spot price at bus `bus` for scenario `s` and stage `t` (0-based `s` and
/// `bus`, 1-based `t`).
///
/// # Safety
/// `sim` must be live; `price` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hldr_simulation_spot(
    sim: *const HldrSimulation,
    s: usize,
    t: usize,
    bus: usize,
    price: *mut f64,
) -> HldrStatus {
    guard(|| {
        let sim = ref_arg(sim, "simulation")?;
        let p = sim
            .inner
            .decisions
            .get(s)
            .and_then(|path| path.get(t.wrapping_sub(1)))
            .and_then(|d| d.spot.get(bus))
            .ok_or_else(|| Failure::Argument(format!("(scenario {s}, stage {t}, bus {bus}) out of range")))?;
        if price.is_null() {
            return Err(Failure::Argument("price is null".into()));
        }
        *price = *p;
        Ok(())
    })
}
