use std::path::Path;
use std::process::{Command, Output};

use killed_chains::io::{read_rows, CheckRow, DomainSpec};
use killed_chains::zoo::{diamond_beta0, generate, FamilySpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_killed-chains"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn summary_status(dir: &Path, check: &str) -> String {
    let mut r = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    r.records()
        .map(|x| x.unwrap())
        .find(|x| &x[0] == check)
        .map(|x| x[1].to_string())
        .unwrap()
}

#[test]
fn solve_diamond_writes_beta0() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = run(&["solve", "--family", "diamond_ball", "--N", "10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = column(&out.join("beta0.csv"), "beta0")[0];
    assert!((b - diamond_beta0(10)).abs() < 1e-12);
    for f in ["kernel.csv", "measure.csv", "spectrum.csv", "phi0.csv", "pi_phi0.csv", "run_config.json", "domain.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let spec = DomainSpec::read(&out.join("domain.json")).unwrap();
    assert_eq!(spec, DomainSpec::generator(FamilySpec::DiamondBall { n: 10 }));
}

#[test]
fn solve_periodic_warns_but_emits_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = run(&["solve", "--family", "five_path", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("period 2"));
    let phi = column(&out.join("phi0.csv"), "value");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (a, b) in phi.iter().zip([0.5, h, 0.5]) {
        assert!((a / phi[1] - b / h).abs() < 1e-12);
    }
}

#[test]
fn iterative_solve_matches_dense_on_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(&FamilySpec::DiamondBall { n: 15 }).unwrap();
    assert!(inst.domain.len() >= 480);
    let spec_path = dir.path().join("mydomain.json");
    DomainSpec::explicit(&inst.domain).write(&spec_path).unwrap();
    let dense = dir.path().join("dense");
    let iter = dir.path().join("iter");
    let sp = spec_path.to_str().unwrap();
    assert!(run(&["solve", "--spec", sp, "--out", dense.to_str().unwrap()]).status.success());
    let o = run(&["solve", "--spec", sp, "--dense-threshold", "100", "--out", iter.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Lanczos"));
    let (a, b) = (column(&dense.join("beta0.csv"), "beta0")[0], column(&iter.join("beta0.csv"), "beta0")[0]);
    assert!((a - b).abs() < 1e-10);
    let (pa, pb) = (column(&dense.join("phi0.csv"), "value"), column(&iter.join("phi0.csv"), "value"));
    let err = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "phi0 differs by {err}");
}

#[test]
fn verify_writes_one_csv_per_check_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = run(&[
        "verify", "--family", "cone45", "--N", "12", "--checks", "carleson,exit_time", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<CheckRow> = read_rows(&out.join("exit_time.csv")).unwrap();
    assert!(rows.iter().all(|r| r.family == "cone45" && r.n == 12 && r.check_id == "exit_time"));
    assert!(out.join("carleson.csv").exists());
    assert_eq!(summary_status(&out, "carleson"), "PASS");
    assert_eq!(summary_status(&out, "exit_time"), "PASS");
}

#[test]
fn verify_all_marks_dumbbell_john_as_xfail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d4");
    let o = run(&["verify", "--checks", "all", "--family", "fig_d4", "--N", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary_status(&out, "john"), "XFAIL");
}

#[test]
fn bad_check_lists_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = run(&["verify", "--family", "cone45", "--checks", "", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify", "--family", "cone45", "--checks", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gaussian_without_certificate_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(&FamilySpec::DiamondBall { n: 4 }).unwrap();
    let spec_path = dir.path().join("d.json");
    DomainSpec::explicit(&inst.domain).write(&spec_path).unwrap();
    let out = dir.path().join("g");
    let o = run(&[
        "verify", "--spec", spec_path.to_str().unwrap(), "--checks", "gaussian", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing prerequisite"));
    let o = run(&[
        "verify", "--spec", spec_path.to_str().unwrap(), "--checks", "gaussian,inner_uniform", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn periodic_convergence_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&["verify", "--family", "five_path", "--checks", "convergence", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic_and_matches_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&[
            "simulate", "--family", "five_path", "--lazify", "--x", "x2", "--t", "2", "--trials", "1000000", "--seed",
            "7", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["survival.csv", "occupancy.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let p = column(&a.join("survival.csv"), "survival")[0];
    let se = column(&a.join("survival.csv"), "std_error")[0];
    let exact = column(&a.join("survival.csv"), "exact")[0];
    assert!((exact - 0.875).abs() < 1e-15);
    assert!((p - exact).abs() < 3.0 * se);
    let o = run(&["simulate", "--family", "five_path", "--trials", "0", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["solve", "--family", "cone45", "--N", "5"])
        .env("KILLED_CHAINS_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let run_dir = dir.path().join("solve_cone45_N5");
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["command"], "solve");
    assert_eq!(cfg["domain"]["generator"]["family"], "cone45");
}
