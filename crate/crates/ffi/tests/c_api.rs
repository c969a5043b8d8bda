use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use dgwve_ffi::*;

fn law_a() -> *mut DgwveLaw {
    let w = [0.45, 0.0, 0.45];
    let mut law = ptr::null_mut();
    assert_eq!(unsafe { dgwve_law_finite(w.as_ptr(), w.len(), &mut law) }, DgwveStatus::Ok);
    law
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dgwve_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn law_round_trip() {
    let law = law_a();
    let mut v = 0.0;
    unsafe {
        assert_eq!(dgwve_law_eval(law, 1.0, 0, &mut v), DgwveStatus::Ok);
        assert!((v - 0.9).abs() < 1e-15);
        assert_eq!(dgwve_law_eval(law, 0.5, 1, &mut v), DgwveStatus::Ok);
        assert!((v - 0.45).abs() < 1e-15);
        let (mut theta, mut found) = (0.0, 0);
        assert_eq!(dgwve_law_fixed_point(law, &mut theta, &mut found), DgwveStatus::Ok);
        // 0.45 θ² - θ + 0.45 = 0
        let root = (1.0 - (1.0f64 - 4.0 * 0.45 * 0.45).sqrt()) / 0.9;
        assert_eq!(found, 1);
        assert!((theta - root).abs() < 1e-12);
        dgwve_law_free(law);
    }
}

#[test]
fn invalid_law_sets_message() {
    let w = [0.7, 0.7];
    let mut law = ptr::null_mut();
    let st = unsafe { dgwve_law_finite(w.as_ptr(), w.len(), &mut law) };
    assert_eq!(st, DgwveStatus::InvalidArgument);
    assert!(law.is_null());
    assert!(last_error().contains("invalid law"), "{}", last_error());
    let st = unsafe { dgwve_law_lf(0.1, 0.4, 1.0, &mut law) };
    assert_eq!(st, DgwveStatus::InvalidArgument);
}

#[test]
fn null_handles_rejected() {
    let mut v = 0.0;
    assert_eq!(unsafe { dgwve_law_eval(ptr::null(), 0.5, 0, &mut v) }, DgwveStatus::NullPointer);
    assert_eq!(unsafe { dgwve_env_survival(ptr::null(), 3, &mut v) }, DgwveStatus::NullPointer);
    let law = law_a();
    assert_eq!(unsafe { dgwve_law_eval(law, 0.5, 0, ptr::null_mut()) }, DgwveStatus::NullPointer);
    unsafe {
        dgwve_law_free(law);
        dgwve_law_free(ptr::null_mut());
        dgwve_env_free(ptr::null_mut());
    }
}

#[test]
fn environment_queries() {
    let law = law_a();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(dgwve_env_constant(law, &mut env), DgwveStatus::Ok);
        dgwve_law_free(law);
        let mut s = 0.0;
        assert_eq!(dgwve_env_survival(env, 1, &mut s), DgwveStatus::Ok);
        assert!((s - 0.45).abs() < 1e-15);
        // f_{0,2}(s) = f(f(s)); P[τ_a > 2] = f(f(1)) - f(f(0))
        let f = |x: f64| 0.45 + 0.45 * x * x;
        assert_eq!(dgwve_env_survival(env, 2, &mut s), DgwveStatus::Ok);
        assert!((s - (f(f(1.0)) - f(f(0.0)))).abs() < 1e-15);

        let (mut mean, mut second) = (0.0, 0.0);
        assert_eq!(dgwve_env_moments(env, 2, &mut mean, &mut second), DgwveStatus::Ok);
        // E[Z_2] = f'(1) f'(f(1))
        let d1 = |x: f64| 0.9 * x;
        assert!((mean - d1(1.0) * d1(f(1.0))).abs() < 1e-14);

        let mut probs = [0.0; 5];
        let (mut delta, mut tail) = (0.0, 0.0);
        assert_eq!(dgwve_env_distribution(env, 2, 4, probs.as_mut_ptr(), &mut delta, &mut tail), DgwveStatus::Ok);
        // f(f(s)) = 0.45 + 0.45 (0.45 + 0.45 s²)²
        let expect = [0.45 + 0.45f64.powi(3), 0.0, 2.0 * 0.45f64.powi(3), 0.0, 0.45f64.powi(3)];
        for (p, e) in probs.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!((delta - (1.0 - f(f(1.0)))).abs() < 1e-15);
        assert!(tail.abs() < 1e-15);

        let mut v = 0.0;
        assert_eq!(dgwve_env_compose_eval(env, 0, 2, 0.3, 0, &mut v), DgwveStatus::Ok);
        assert!((v - f(f(0.3))).abs() < 1e-15);
        dgwve_env_free(env);
    }
}

#[test]
fn env_from_json_and_errors() {
    let good = CString::new(r#"{"kind":"named","id":"example-1b"}"#).unwrap();
    let bad = CString::new(r#"{"kind":"named","id":"nope"}"#).unwrap();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(dgwve_env_from_json(good.as_ptr(), &mut env), DgwveStatus::Ok);
        let mut s = 0.0;
        assert_eq!(dgwve_env_survival(env, 10, &mut s), DgwveStatus::Ok);
        assert!(s > 0.0 && s < 1.0);
        let mut probs = [0.0; 1];
        let (mut d, mut t) = (0.0, 0.0);
        let st = dgwve_env_distribution(env, 3, 0, probs.as_mut_ptr(), &mut d, &mut t);
        assert_eq!(st, DgwveStatus::InvalidArgument);
        dgwve_env_free(env);

        let mut other = ptr::null_mut();
        assert_eq!(dgwve_env_from_json(bad.as_ptr(), &mut other), DgwveStatus::InvalidArgument);
        assert!(other.is_null());
        assert_eq!(dgwve_env_from_json(ptr::null(), &mut other), DgwveStatus::NullPointer);
    }
}

#[test]
fn simulate_matches_exact_and_ignores_threads() {
    let law = law_a();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(dgwve_env_constant(law, &mut env), DgwveStatus::Ok);
        dgwve_law_free(law);
        let mut one = DgwveMcSummary::default();
        let mut four = DgwveMcSummary::default();
        assert_eq!(dgwve_simulate(env, 3, 20_000, DgwveMode::Direct, 7, 1, &mut one), DgwveStatus::Ok);
        assert_eq!(dgwve_simulate(env, 3, 20_000, DgwveMode::Direct, 7, 4, &mut four), DgwveStatus::Ok);
        assert_eq!(one, four);
        let mut exact = 0.0;
        dgwve_env_survival(env, 3, &mut exact);
        assert!((one.survival - exact).abs() < 5.0 * one.survival_se);
        assert_eq!(one.extinct + one.absorbed_delta + one.alive + one.overflow, 20_000);

        let mut out = DgwveMcSummary::default();
        assert_eq!(dgwve_simulate(env, 3, 0, DgwveMode::Coupled, 7, 0, &mut out), DgwveStatus::InvalidArgument);
        dgwve_env_free(env);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(dgwve_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dgwve.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["dgwve_law_finite", "dgwve_env_from_json", "dgwve_simulate", "DGWVE_STATUS_BUDGET"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    match Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() {
        Ok(st) => assert!(st.success()),
        Err(_) => eprintln!("no C compiler; syntax check skipped"),
    }
}
