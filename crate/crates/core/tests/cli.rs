use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fiberqed::cascade::TRACE_HEADER;
use fiberqed::output::read_sidecar;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiberqed"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn fiberqed")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn edited(dir: &Path, base: &str, edit: impl Fn(&str) -> String) -> PathBuf {
    let text = std::fs::read_to_string(configs().join(base)).unwrap();
    let path = dir.join(base);
    std::fs::write(&path, edit(&text)).unwrap();
    path
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(&configs().join("valid.cfg"), dir.path(), &["validate"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let bad = run(&configs().join("desk.cfg"), dir.path(), &["validate"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("violated"));
}

#[test]
fn missing_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "valid.cfg", |t| {
        t.lines().filter(|l| !l.starts_with("alpha")).collect::<Vec<_>>().join("\n")
    });
    let o = run(&cfg, dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing required key 'alpha'"), "{}", stderr(&o));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&configs().join("valid.cfg"), dir.path(), &["verify", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("identities"));
}

#[test]
fn empty_momenta_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "desk.cfg", |t| t.replace("momenta = 0.1, 0, 0", "momenta ="));
    let o = run(&cfg, dir.path(), &["mass-scan"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_fiberqed")).arg("validate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn violated_constraints_block_the_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "desk.cfg", |t| t.replace("allow_invalid = true", ""));
    let o = run(&cfg, dir.path(), &["cascade"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn cascade_writes_trace_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&configs().join("valid.cfg"), dir.path(), &["cascade", "--sidecars"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    let rows = lines.take_while(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 4);
    assert!(trace.contains("sha256"));
    for j in 0..=3 {
        let psi = read_sidecar(&dir.path().join(format!("psi_{j}.fqv"))).unwrap();
        let n: f64 = psi.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-10);
        assert!(dir.path().join(format!("phi_{j}.fqv")).exists());
    }
    assert!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("convergence"));
}

#[test]
fn grid_dump_lists_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&configs().join("valid.cfg"), dir.path(), &["grid-dump"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let data = csv.lines().skip(1).filter(|l| !l.starts_with('#')).count();
    assert_eq!(data, 36);
}

#[test]
fn verify_identities_passes_on_the_valid_box() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&configs().join("valid.cfg"), dir.path(), &["verify", "--suite", "identities"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{out}\n{}", stderr(&o));
    assert!(out.contains("PASS gamma_orthogonality[j=3]"));
    assert!(!out.contains("FAIL"));
}
