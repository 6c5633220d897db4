use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dhym_core::gridfile::Grid;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> PathBuf {
    root().join("configs").join(name)
}

fn dhym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhym")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 report")
}

fn value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in report:\n{report}"))
        .to_string()
}

fn num(report: &str, key: &str) -> f64 {
    value(report, key).parse().expect("numeric value")
}

/// Compares with `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dhym-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn angles_closed_forms() {
    let o = dhym(&["angles", "0 0; 0 0"]);
    assert!(o.status.success());
    let r = stdout(&o);
    assert_eq!(value(&r, "in_s"), "true");
    assert!((num(&r, "phi_usc") - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    let r = stdout(&dhym(&["angles", "1 0; 0 1"]));
    assert!((num(&r, "theta") - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn angles_sample_golden() {
    let o = dhym(&["angles", "--config", config("angles_sample.txt").to_str().unwrap()]);
    assert!(o.status.success());
    golden("angles_sample.txt", &stdout(&o));
}

#[test]
fn angles_rejects_non_hermitian() {
    assert_eq!(dhym(&["angles", "0 1; 0 0"]).status.code(), Some(2));
    assert_eq!(dhym(&["angles", "1 x"]).status.code(), Some(2));
}

#[test]
fn dhym_closed_forms() {
    let r = stdout(&dhym(&["dhym", "--config", config("dhym_constant.toml").to_str().unwrap()]));
    assert!((num(&r, "hat_theta") - 3f64.atan()).abs() < 1e-12);
    assert_eq!(num(&r, "residual_max_abs"), 0.0);
    let r = stdout(&dhym(&["dhym", "--config", config("dhym_zero.toml").to_str().unwrap()]));
    assert_eq!(num(&r, "hat_theta"), 0.0);
}

#[test]
fn dhym_sample_golden_and_files() {
    let out = tmp("dhym");
    let o = dhym(&["dhym", "--config", config("dhym_sample.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    golden("dhym_sample.txt", &stdout(&o));
    let theta = Grid::load(&out.join("theta.grid")).unwrap();
    assert_eq!(theta.dims, vec![8, 8, 8, 8]);
    let r = stdout(&o);
    assert!((theta.min() - num(&r, "theta_min")).abs() < 1e-11);
    assert!(Grid::load(&out.join("residual.grid")).is_ok());
    let _ = std::fs::remove_dir_all(out);
}

#[test]
fn fuzz_exit_codes() {
    let o = dhym(&["fuzz", "--suite", "convexity", "--c", "0.7853981633974483", "--n", "1", "--trials", "10000", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(dhym(&["fuzz", "--suite", "duality"]).status.code(), Some(0));
    let o = dhym(&["fuzz", "--suite", "convexity-negative", "--c", "-0.7853981633974483", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(num(&stdout(&o), "violations") >= 1.0);
    // inside the regime a negative control is a usage error
    assert_eq!(dhym(&["fuzz", "--suite", "convexity-negative", "--c", "2.0", "--n", "2"]).status.code(), Some(2));
    assert_eq!(dhym(&["fuzz", "--suite", "convexity", "--c", "0.1", "--n", "2"]).status.code(), Some(2));
}

#[test]
fn fuzz_reports_are_reproducible() {
    let a = dhym(&["fuzz", "--suite", "positivity", "--trials", "500", "--seed", "7"]);
    let b = dhym(&["fuzz", "--suite", "positivity", "--trials", "500", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(value(&stdout(&a), "seed"), "7");
}

#[test]
fn geodesic_constant_shift() {
    let o = dhym(&["geodesic", "--config", config("geodesic_shift.toml").to_str().unwrap()]);
    let r = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{r}");
    assert!(num(&r, "exact_shift_error") <= 5e-4);
    assert_eq!(value(&r, "validation"), "pass");
}

#[test]
fn geodesic_rejects_data_outside_h() {
    let o = dhym(&["geodesic", "--config", config("geodesic_bad.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not in H"));
}

#[test]
fn geodesic_sample_golden_and_thread_independent() {
    let out = tmp("geodesic");
    let cfg = config("geodesic_sample.toml");
    let one = dhym(&["geodesic", "--config", cfg.to_str().unwrap(), "--threads", "1", "--out", out.to_str().unwrap()]);
    let three = dhym(&["geodesic", "--config", cfg.to_str().unwrap(), "--threads", "3"]);
    assert_eq!(one.status.code(), Some(0), "{}", stdout(&one));
    assert_eq!(one.stdout, three.stdout);
    golden("geodesic_sample.txt", &stdout(&one));
    let r = stdout(&one);
    assert_eq!(value(&r, "sandwich_ok"), "true");
    assert_eq!(value(&r, "slices_ok"), "true");
    let psi = Grid::load(&out.join("psi.grid")).unwrap();
    assert_eq!(psi.dims, vec![9, 8, 8]);
    let csv = std::fs::read_to_string(out.join("slices.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert_eq!(std::fs::read_to_string(out.join("report.txt")).unwrap(), r);
    let _ = std::fs::remove_dir_all(out);
}

#[test]
fn geodesic_gauss_seidel_override() {
    let cfg = config("geodesic_sample.toml");
    let o = dhym(&["geodesic", "--config", cfg.to_str().unwrap(), "--mode", "gauss-seidel"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "mode"), "gauss-seidel");
}

#[test]
fn config_errors_exit_2() {
    let dir = tmp("bad-config");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("c.toml");
    std::fs::write(&p, "[geometry]\nn = 1\ngrid = [8, 8]\nalpha0 = \"3\"\ncolour = 1\n[potential]\nphi = \"0\"\n").unwrap();
    assert_eq!(dhym(&["dhym", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&p, "[geometry]\nn = 1\ngrid = [7, 8]\nalpha0 = \"3\"\n[potential]\nphi = \"0\"\n").unwrap();
    assert_eq!(dhym(&["dhym", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(dhym(&["dhym", "--config", dir.join("missing.toml").to_str().unwrap()]).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(dir);
}
