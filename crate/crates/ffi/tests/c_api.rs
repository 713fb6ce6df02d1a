use std::ffi::{c_char, CStr};
use std::ptr;

use weighted_blowup_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        wb_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn params(m: f64, p: f64, sigma: f64) -> *mut WbParams {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { wb_params_new(m, p, sigma, &mut h) }, WbStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(wb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn params_round_trip_exponents() {
    let h = params(3.0, 2.0, 1.0);
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { wb_params_exponents(h, &mut a, &mut b) }, WbStatus::Ok);
    // alpha = (sigma+2)/(sigma(m-1)+2(p-1)), beta = (m-p)/(same)
    assert!((a - 0.75).abs() < 1e-15);
    assert!((b - 0.25).abs() < 1e-15);
    assert!((a * (3.0 - 2.0) - b * (1.0 + 2.0)).abs() < 1e-14);
    unsafe { wb_params_free(h) };
}

#[test]
fn domain_errors_set_message() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { wb_params_new(3.0, 4.0, 1.0, &mut h) }, WbStatus::Domain);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { wb_params_new(3.0, 1.0, 1.0, &mut h) }, WbStatus::Domain);
    assert_eq!(
        unsafe { wb_params_new_validation(3.0, 1.0, 1.0, true, false, &mut h) },
        WbStatus::Ok
    );
    unsafe { wb_params_free(h) };
}

#[test]
fn null_arguments_are_rejected() {
    assert_eq!(unsafe { wb_params_new(3.0, 2.0, 1.0, ptr::null_mut()) }, WbStatus::NullPointer);
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { wb_params_exponents(ptr::null(), &mut a, &mut b) }, WbStatus::NullPointer);
    assert_eq!(unsafe { wb_profile_len(ptr::null()) }, 0);
    assert_eq!(unsafe { wb_orbit_len(ptr::null()) }, 0);
    unsafe {
        wb_params_free(ptr::null_mut());
        wb_config_free(ptr::null_mut());
        wb_profile_free(ptr::null_mut());
        wb_orbit_free(ptr::null_mut());
    }
}

#[test]
fn config_validation() {
    let c = wb_config_new();
    assert_eq!(unsafe { wb_config_set_tolerances(c, 1e-9, 1e-13) }, WbStatus::Ok);
    assert_eq!(unsafe { wb_config_set_tolerances(c, -1.0, 1e-13) }, WbStatus::Config);
    assert_eq!(unsafe { wb_config_set_budget(c, 0.0, 10) }, WbStatus::Config);
    unsafe { wb_config_free(c) };
}

#[test]
fn explicit_profile_vanishes_past_interface() {
    let (mut f, mut df, mut fm) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { wb_explicit_profile(3.0, 0.5, &mut f, &mut df, &mut fm) }, WbStatus::Ok);
    assert!(f > 0.0);
    assert_eq!(unsafe { wb_explicit_profile(3.0, 3.0, &mut f, &mut df, &mut fm) }, WbStatus::Ok);
    assert_eq!(f, 0.0);
    assert_eq!(unsafe { wb_explicit_profile(0.5, 1.0, &mut f, &mut df, &mut fm) }, WbStatus::Domain);
}

#[test]
fn small_sigma_profile_is_positive_at_origin() {
    let h = params(3.0, 2.0, 1.0);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { wb_profile_find(h, ptr::null(), 1e-8, &mut g) }, WbStatus::Ok, "{}", last_error());
    let (mut kind, mut eta0, mut a0) = (WbProfileKind::P2Case1, 0.0, 0.0);
    assert_eq!(unsafe { wb_profile_summary(g, &mut kind, &mut eta0, &mut a0) }, WbStatus::Ok);
    assert_eq!(kind, WbProfileKind::P1);
    assert!(a0 > 0.0 && eta0 > 0.0);
    let n = unsafe { wb_profile_len(g) };
    assert!(n > 10);
    let (mut xi, mut f, mut df, mut fm) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { wb_profile_sample(g, 0, &mut xi, &mut f, &mut df, &mut fm) }, WbStatus::Ok);
    assert!(f.is_finite());
    assert_eq!(
        unsafe { wb_profile_sample(g, n, &mut xi, &mut f, &mut df, &mut fm) },
        WbStatus::IndexOutOfRange
    );
    unsafe {
        wb_profile_free(g);
        wb_params_free(h);
    }
}

#[test]
fn large_sigma_p2_orbit_changes_sign() {
    let h = params(3.0, 2.0, 5.0);
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { wb_orbit_from_p2(h, ptr::null(), &mut o) }, WbStatus::Ok, "{}", last_error());
    let (mut class, mut detail) = (WbTerminalClass::Unresolved, 0.0);
    assert_eq!(unsafe { wb_orbit_terminal(o, &mut class, &mut detail) }, WbStatus::Ok);
    assert_eq!(class, WbTerminalClass::EntersQ3);
    let n = unsafe { wb_orbit_len(o) };
    assert!(n > 1);
    let (mut chart, mut coords, mut logxi) = (WbChart::Lower, [0.0; 3], 0.0);
    assert_eq!(
        unsafe { wb_orbit_state(o, 0, &mut chart, coords.as_mut_ptr(), &mut logxi) },
        WbStatus::Ok
    );
    assert_eq!(chart, WbChart::Upper);
    assert!(coords.iter().all(|c| c.is_finite()));
    unsafe {
        wb_orbit_free(o);
        wb_params_free(h);
    }
}

#[test]
fn p0_family_rejects_bad_k() {
    let h = params(3.0, 2.0, 5.0);
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { wb_orbit_from_p0(h, -1.0, ptr::null(), &mut o) }, WbStatus::InvalidInput);
    assert!(o.is_null());
    unsafe { wb_params_free(h) };
}

#[test]
fn sigma_star_bad_tolerance() {
    let (mut s, mut lo, mut hi) = (0.0, 0.0, 0.0);
    let st = unsafe { wb_find_sigma_star(3.0, 1.5, 0.5, 8.0, 0.0, ptr::null(), &mut s, &mut lo, &mut hi) };
    assert_eq!(st, WbStatus::InvalidInput);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/weighted_blowup.h");
    for name in [
        "wb_version",
        "wb_last_error",
        "wb_params_new",
        "wb_params_new_validation",
        "wb_params_free",
        "wb_params_exponents",
        "wb_config_new",
        "wb_config_free",
        "wb_config_set_tolerances",
        "wb_config_set_budget",
        "wb_profile_find",
        "wb_profile_free",
        "wb_profile_summary",
        "wb_profile_len",
        "wb_profile_sample",
        "wb_orbit_from_p2",
        "wb_orbit_from_p0",
        "wb_orbit_free",
        "wb_orbit_terminal",
        "wb_orbit_len",
        "wb_orbit_state",
        "wb_find_sigma_star",
        "wb_explicit_profile",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct WbParams WbParams;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"weighted_blowup.h\"\n\
         int main(void) {\n\
           WbParams *p = NULL;\n\
           WbStatus s = wb_params_new(3.0, 2.0, 1.0, &p);\n\
           wb_params_free(p);\n\
           return s == WB_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
