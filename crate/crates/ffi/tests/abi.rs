use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fiberqed_ffi::*;

const CONFIG: &str = "\
alpha = 1e-3
epsilon = 0.3
lambda = 1.0
mu = 0.2
rho_minus = 0.1
rho_plus = 0.4
c_alpha = 0.35
p = 0.1, 0, 0
scales = 2
allow_invalid = true
";

fn parse(text: &str) -> (FqStatus, *mut FqConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { fq_config_parse(c.as_ptr(), &mut cfg) };
    (st, cfg)
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let mut len = 0usize;
    let st = unsafe { fq_last_error(buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, FqStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(fq_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_errors_map_to_codes() {
    let (st, cfg) = parse("alpha = 1\n");
    assert_eq!(st, FqStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("missing required key"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { fq_config_parse(ptr::null(), &mut out) }, FqStatus::NullPointer);
    assert_eq!(unsafe { fq_cascade_run(ptr::null(), &mut ptr::null_mut()) }, FqStatus::NullPointer);
    assert_eq!(unsafe { fq_cascade_len(ptr::null()) }, 0);
}

#[test]
fn validate_and_constraint_gate() {
    let (st, cfg) = parse(&CONFIG.replace("allow_invalid = true\n", ""));
    assert_eq!(st, FqStatus::Ok);
    let mut pass = true;
    let mut failures = 0usize;
    assert_eq!(unsafe { fq_validate(cfg, &mut pass, &mut failures) }, FqStatus::Ok);
    assert!(!pass);
    assert!(failures >= 1);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { fq_cascade_run(cfg, &mut c) }, FqStatus::ConstraintViolated);
    assert!(c.is_null());
    assert_eq!(unsafe { fq_config_set_alpha(cfg, -1.0) }, FqStatus::Parameter);
    unsafe { fq_config_free(cfg) };
}

#[test]
fn cascade_round_trip() {
    let (st, cfg) = parse(CONFIG);
    assert_eq!(st, FqStatus::Ok);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { fq_cascade_run(cfg, &mut c) }, FqStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { fq_cascade_len(c) }, 3);

    let (mut e, mut g, mut s) = (0.0, [0.0; 3], 0.0);
    assert_eq!(unsafe { fq_cascade_scale(c, 0, &mut e, g.as_mut_ptr(), &mut s) }, FqStatus::Ok);
    assert!((e - 0.005).abs() < 1e-12);
    assert!((g[0] - 0.1).abs() < 1e-12);
    assert!(s > 0.0);
    assert_eq!(unsafe { fq_cascade_scale(c, 3, &mut e, ptr::null_mut(), ptr::null_mut()) }, FqStatus::OutOfRange);

    let mut len = 0usize;
    assert_eq!(unsafe { fq_cascade_state(c, 2, ptr::null_mut(), 0, &mut len) }, FqStatus::Ok);
    let mut short = vec![0.0; len - 1];
    assert_eq!(unsafe { fq_cascade_state(c, 2, short.as_mut_ptr(), short.len(), &mut len) }, FqStatus::BufferTooSmall);
    let mut psi = vec![0.0; len];
    assert_eq!(unsafe { fq_cascade_state(c, 2, psi.as_mut_ptr(), psi.len(), &mut len) }, FqStatus::Ok);
    let n: f64 = psi.iter().map(|x| x * x).sum();
    assert!((n - 1.0).abs() < 1e-10);

    let (mut h, mut k) = (0.0, 0.0);
    assert_eq!(unsafe { fq_cascade_curvature(c, 2, &mut h, &mut k) }, FqStatus::Ok, "{}", last_error());
    assert!((h - k).abs() < 1e-5 && h < 1.0 && h > 0.9, "{h} {k}");

    unsafe {
        fq_cascade_free(c);
        fq_config_free(cfg);
    }
}

#[test]
fn header_declares_every_symbol_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/fiberqed.h")).unwrap();
    for sym in [
        "fq_version",
        "fq_last_error",
        "fq_config_parse",
        "fq_config_free",
        "fq_config_set_alpha",
        "fq_validate",
        "fq_cascade_run",
        "fq_cascade_free",
        "fq_cascade_len",
        "fq_cascade_scale",
        "fq_cascade_state",
        "fq_cascade_curvature",
        "typedef struct FqCascade FqCascade",
        "FQ_STATUS_OK = 0",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(dir.join("include/fiberqed.h"))
        .output()
    else {
        eprintln!("cc not available; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
