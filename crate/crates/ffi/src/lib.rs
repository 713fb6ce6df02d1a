//! C interface to `weighted-blowup`.
//!
//! Objects cross the boundary as opaque pointers created by a `wb_*_new` or
//! `wb_*_find` call and released with the matching `wb_*_free`. Every fallible
//! call returns a [`WbStatus`]; on failure, [`wb_last_error`] gives the message.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use weighted_blowup::bifurcation::find_sigma_star;
use weighted_blowup::integrator::{IntegrationConfig, OrbitTrace};
use weighted_blowup::model::{derive_exponents_with, explicit_solution, Chart, Params, ValidationFlags};
use weighted_blowup::orbits::{classify_from_p0, classify_from_p2, TerminalClass};
use weighted_blowup::shooting::{bisect_eta, default_bracket, GoodProfile, ProfileKind, ShootOptions};
use weighted_blowup::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WbStatus {
    Ok = 0,
    NullPointer = 1,
    /// Exponents outside the admissible range.
    Domain = 2,
    InvalidInput = 3,
    Config = 4,
    /// Integration failed (step size underflow, chart error).
    Numeric = 5,
    Bracket = 6,
    AmbiguousLimit = 7,
    Certification = 8,
    IndexOutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WbProfileKind {
    P1 = 0,
    P2Case1 = 1,
    P2Case2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WbTerminalClass {
    EntersPgamma0 = 0,
    EntersP1 = 1,
    EntersQ3 = 2,
    Q4Diagnostic = 3,
    Unresolved = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WbChart {
    Lower = 0,
    Upper = 1,
    BarZ = 2,
}

/// Exponents of one problem instance.
pub struct WbParams(Params);
/// Integrator settings.
pub struct WbConfig(IntegrationConfig);
/// A good profile found by shooting.
pub struct WbProfile(GoodProfile);
/// A forward orbit with its terminal class.
pub struct WbOrbit {
    trace: OrbitTrace,
    class: TerminalClass,
    detail: Option<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut v = e.borrow_mut();
        v.clear();
        v.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(e: &Error) -> WbStatus {
    match e {
        Error::Domain(_) => WbStatus::Domain,
        Error::InvalidInput(_) | Error::BadFamilyParam(_) | Error::BadDelta(_) | Error::OutOfValidity { .. } => {
            WbStatus::InvalidInput
        }
        Error::Config(_) => WbStatus::Config,
        Error::Bracket(_) => WbStatus::Bracket,
        Error::AmbiguousLimit(_) => WbStatus::AmbiguousLimit,
        Error::Certification(_) => WbStatus::Certification,
        _ => WbStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), WbStatus>) -> WbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside the library");
            WbStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, WbStatus>;
}

impl<T> OrStatus<T> for weighted_blowup::Result<T> {
    fn or_status(self) -> Result<T, WbStatus> {
        self.map_err(|e| {
            set_error(&e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, WbStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument");
        WbStatus::NullPointer
    })
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), WbStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(WbStatus::NullPointer);
    }
    out.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wb_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wb_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Validates `1 < p < m`, `sigma > 0` and derives the similarity exponents.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wb_params_new(m: f64, p: f64, sigma: f64, out: *mut *mut WbParams) -> WbStatus {
    wb_params_new_validation(m, p, sigma, false, false, out)
}

/// As [`wb_params_new`], optionally admitting the reference cases `p = 1` and `sigma = 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wb_params_new_validation(
    m: f64,
    p: f64,
    sigma: f64,
    allow_p_one: bool,
    allow_sigma_zero: bool,
    out: *mut *mut WbParams,
) -> WbStatus {
    guard(|| {
        let flags = ValidationFlags {
            allow_p_one,
            allow_sigma_zero,
        };
        let params = derive_exponents_with(m, p, sigma, flags).or_status()?;
        write(out, boxed(WbParams(params)))
    })
}

/// # Safety
/// `params` must come from `wb_params_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wb_params_free(params: *mut WbParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// `alpha` and `beta` of the similarity variables.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_params_exponents(params: *const WbParams, alpha: *mut f64, beta: *mut f64) -> WbStatus {
    guard(|| {
        let p = deref(params)?;
        write(alpha, p.0.alpha)?;
        write(beta, p.0.beta)
    })
}

/// Default integrator settings.
#[no_mangle]
pub extern "C" fn wb_config_new() -> *mut WbConfig {
    boxed(WbConfig(IntegrationConfig::default()))
}

/// # Safety
/// `config` must come from `wb_config_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wb_config_free(config: *mut WbConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets the relative and absolute step tolerances.
///
/// # Safety
/// `config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_config_set_tolerances(config: *mut WbConfig, rel_tol: f64, abs_tol: f64) -> WbStatus {
    guard(|| {
        let c = config.as_mut().ok_or(WbStatus::NullPointer)?;
        let next = IntegrationConfig {
            rel_tol,
            abs_tol,
            ..c.0
        };
        next.validate().or_status()?;
        c.0 = next;
        Ok(())
    })
}

/// Sets the system-time budget and the step count limit.
///
/// # Safety
/// `config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_config_set_budget(config: *mut WbConfig, max_arc: f64, max_steps: usize) -> WbStatus {
    guard(|| {
        let c = config.as_mut().ok_or(WbStatus::NullPointer)?;
        let next = IntegrationConfig {
            max_arc,
            max_steps,
            ..c.0
        };
        next.validate().or_status()?;
        c.0 = next;
        Ok(())
    })
}

/// Shoots from the interface over a default bracket and bisects to `tol_eta`.
///
/// # Safety
/// Pointers must be valid; `config` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn wb_profile_find(
    params: *const WbParams,
    config: *const WbConfig,
    tol_eta: f64,
    out: *mut *mut WbProfile,
) -> WbStatus {
    guard(|| {
        let p = &deref(params)?.0;
        let cfg = config.as_ref().map_or_else(IntegrationConfig::default, |c| c.0);
        let bracket = default_bracket(p, &cfg, &ShootOptions::default()).or_status()?;
        let g = bisect_eta(p, bracket, &cfg, tol_eta).or_status()?;
        write(out, boxed(WbProfile(g)))
    })
}

/// # Safety
/// `profile` must come from `wb_profile_find` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wb_profile_free(profile: *mut WbProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Kind, interface point and (for `P1`) the value at the origin; `a0` is NaN otherwise.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_profile_summary(
    profile: *const WbProfile,
    kind: *mut WbProfileKind,
    eta0: *mut f64,
    a0: *mut f64,
) -> WbStatus {
    guard(|| {
        let g = &deref(profile)?.0;
        let k = match g.kind {
            ProfileKind::P1 => WbProfileKind::P1,
            ProfileKind::P2Case1 => WbProfileKind::P2Case1,
            ProfileKind::P2Case2 => WbProfileKind::P2Case2,
        };
        write(kind, k)?;
        write(eta0, g.eta0)?;
        write(a0, g.a0.unwrap_or(f64::NAN))
    })
}

/// Number of profile samples.
///
/// # Safety
/// `profile` must be valid or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn wb_profile_len(profile: *const WbProfile) -> usize {
    profile.as_ref().map_or(0, |g| g.0.samples.len())
}

/// Sample `i`: `xi`, `f`, `f'` and `(f^m)'`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_profile_sample(
    profile: *const WbProfile,
    i: usize,
    xi: *mut f64,
    f: *mut f64,
    df: *mut f64,
    fm_prime: *mut f64,
) -> WbStatus {
    guard(|| {
        let g = &deref(profile)?.0;
        let s = g.samples.get(i).ok_or_else(|| {
            set_error(&format!("sample {i} of {}", g.samples.len()));
            WbStatus::IndexOutOfRange
        })?;
        write(xi, s.xi)?;
        write(f, s.f)?;
        write(df, s.df)?;
        write(fm_prime, s.fm_prime)
    })
}

fn terminal(class: TerminalClass) -> WbTerminalClass {
    match class {
        TerminalClass::EntersPgamma0 => WbTerminalClass::EntersPgamma0,
        TerminalClass::EntersP1 => WbTerminalClass::EntersP1,
        TerminalClass::EntersQ3 => WbTerminalClass::EntersQ3,
        TerminalClass::Q4Diagnostic => WbTerminalClass::Q4Diagnostic,
        TerminalClass::Unresolved => WbTerminalClass::Unresolved,
    }
}

/// Orbit leaving `P2` when `k` is `None`, else the member `k` of the `P0` family.
unsafe fn orbit(params: *const WbParams, config: *const WbConfig, k: Option<f64>, out: *mut *mut WbOrbit) -> WbStatus {
    guard(|| {
        let p = &deref(params)?.0;
        let cfg = config.as_ref().map_or_else(IntegrationConfig::default, |c| c.0);
        let (t, trace) = match k {
            Some(k) => classify_from_p0(p, k, &cfg),
            None => classify_from_p2(p, &cfg),
        }
        .or_status()?;
        write(
            out,
            boxed(WbOrbit {
                trace,
                class: t.class,
                detail: t.detail,
            }),
        )
    })
}

/// The orbit leaving `P2` into the positive half-space.
///
/// # Safety
/// Pointers must be valid; `config` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn wb_orbit_from_p2(
    params: *const WbParams,
    config: *const WbConfig,
    out: *mut *mut WbOrbit,
) -> WbStatus {
    orbit(params, config, None, out)
}

/// The member `Z ~ k X` of the family leaving `P0`; `k` must be positive.
///
/// # Safety
/// Pointers must be valid; `config` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn wb_orbit_from_p0(
    params: *const WbParams,
    k: f64,
    config: *const WbConfig,
    out: *mut *mut WbOrbit,
) -> WbStatus {
    orbit(params, config, Some(k), out)
}

/// # Safety
/// `orbit` must come from `wb_orbit_from_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wb_orbit_free(orbit: *mut WbOrbit) {
    if !orbit.is_null() {
        drop(Box::from_raw(orbit));
    }
}

/// Terminal class; `detail` is the interface point for `EntersP1`, the
/// sign-change point for `EntersQ3`, NaN otherwise.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_orbit_terminal(
    orbit: *const WbOrbit,
    class: *mut WbTerminalClass,
    detail: *mut f64,
) -> WbStatus {
    guard(|| {
        let o = deref(orbit)?;
        write(class, terminal(o.class))?;
        write(detail, o.detail.unwrap_or(f64::NAN))
    })
}

/// Number of stored states.
///
/// # Safety
/// `orbit` must be valid or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn wb_orbit_len(orbit: *const WbOrbit) -> usize {
    orbit.as_ref().map_or(0, |o| o.trace.states.len())
}

/// State `i`: chart, three coordinates and `ln xi`.
///
/// # Safety
/// Pointers must be valid; `coords` must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn wb_orbit_state(
    orbit: *const WbOrbit,
    i: usize,
    chart: *mut WbChart,
    coords: *mut f64,
    logxi: *mut f64,
) -> WbStatus {
    guard(|| {
        let o = deref(orbit)?;
        let s = o.trace.states.get(i).ok_or_else(|| {
            set_error(&format!("state {i} of {}", o.trace.states.len()));
            WbStatus::IndexOutOfRange
        })?;
        let c = match s.chart {
            Chart::Lower => WbChart::Lower,
            Chart::Upper => WbChart::Upper,
            Chart::BarZ => WbChart::BarZ,
        };
        write(chart, c)?;
        if coords.is_null() {
            return Err(WbStatus::NullPointer);
        }
        ptr::copy_nonoverlapping(s.coords.as_ptr(), coords, 3);
        write(logxi, s.logxi)
    })
}

/// Bisects on `sigma` for the switch of the `P2` orbit from the tail attractor to a sign change.
///
/// # Safety
/// Pointers must be valid; `config` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn wb_find_sigma_star(
    m: f64,
    p: f64,
    sigma_lo: f64,
    sigma_hi: f64,
    tol: f64,
    config: *const WbConfig,
    sigma_star: *mut f64,
    bracket_lo: *mut f64,
    bracket_hi: *mut f64,
) -> WbStatus {
    guard(|| {
        let cfg = config.as_ref().map_or_else(IntegrationConfig::default, |c| c.0);
        let r = find_sigma_star(m, p, (sigma_lo, sigma_hi), tol, &cfg).or_status()?;
        write(sigma_star, r.sigma_star)?;
        write(bracket_lo, r.bracket.0)?;
        write(bracket_hi, r.bracket.1)
    })
}

/// Closed-form profile for `p = 1`, `sigma = sqrt(2(m+1))`, at `xi`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wb_explicit_profile(m: f64, xi: f64, f: *mut f64, df: *mut f64, fm_prime: *mut f64) -> WbStatus {
    guard(|| {
        if !(m > 1.0 && m.is_finite()) {
            set_error(&format!("m must be > 1, got {m}"));
            return Err(WbStatus::Domain);
        }
        let s = explicit_solution(m, xi);
        write(f, s.f)?;
        write(df, s.df)?;
        write(fm_prime, s.fm_prime)
    })
}
