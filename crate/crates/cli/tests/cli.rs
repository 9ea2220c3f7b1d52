use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use psi_spectral::reconstruct::{project_onto_span, uniform_grid, ReconstructedFunction};
use psi_spectral_cli::table::{coefficients_csv, parse_coefficients};
use serde_json::Value;
use tempfile::TempDir;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psi-spectral"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, problem: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--problem",
        problem.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_problem(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("problem.txt");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn assemble_hermite_dump() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "assemble", &problems().join("hermite.txt"), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dump = fs::read_to_string(tmp.path().join("matrix.dump")).unwrap();
    assert!(dump.lines().any(|l| l == "bandwidth 6"));
    let report = json(&tmp.path().join("assemble.json"));
    assert_eq!(report["problem"]["bandwidth"], 6);
    assert_eq!(report["conditions"]["c2_bandwidth_ok"], true);
    assert!(tmp.path().join("matrix.csv").exists());
}

#[test]
fn assemble_zero_operator_has_no_entries() {
    let tmp = TempDir::new().unwrap();
    let p = write_problem(tmp.path(), "order: 0\nd0: 0\ntruncation: 5\n");
    let out = run_in(tmp.path(), "assemble", &p, &[]);
    assert!(out.status.success());
    let dump = fs::read_to_string(tmp.path().join("matrix.dump")).unwrap();
    assert!(dump
        .lines()
        .all(|l| l.starts_with('#') || l.split(' ').count() == 2));
}

#[test]
fn malformed_rational_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let p = write_problem(tmp.path(), "order: 1\nd0: 3/0\nd1: 1\n");
    let out = run_in(tmp.path(), "assemble", &p, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn precondition_violation_exit_code() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        "assemble",
        &problems().join("hermite.txt"),
        &["--kdiamond", "0"],
    );
    assert_eq!(out.status.code(), Some(3));
    let out = run_in(
        tmp.path(),
        "solve",
        &problems().join("hermite.txt"),
        &["--truncation", "4"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_hermite_ground_state() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "solve", &problems().join("hermite.txt"), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&tmp.path().join("solve.json"));
    assert_eq!(r["accepted_dimension"], 1);
    assert_eq!(r["converged"], true);
    let v = &r["vectors"][0];
    assert!(v["residual_sup"].as_f64().unwrap() < 1e-5);
    assert!(v["oracle"]["max_abs_dev"].as_f64().unwrap() < 1e-6);
    for name in ["coeffs_0.csv", "samples_0.csv", "trajectory_0.csv"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn solve_hermite_off_spectrum() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        "solve",
        &problems().join("hermite.txt"),
        &["--lambda", "2"],
    );
    assert!(out.status.success());
    assert_eq!(
        json(&tmp.path().join("solve.json"))["accepted_dimension"],
        0
    );
}

#[test]
fn non_convergence_exit_code() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        "solve",
        &problems().join("hermite.txt"),
        &["--angle-tol", "1e-15"],
    );
    assert_eq!(out.status.code(), Some(4));
    let r = json(&tmp.path().join("solve.json"));
    assert_eq!(r["converged"], false);
    assert_eq!(r["accepted_dimension"], 0);
}

#[test]
fn reports_are_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let p = problems().join("hermite.txt");
    assert!(run_in(a.path(), "solve", &p, &[]).status.success());
    assert!(run_in(b.path(), "solve", &p, &[]).status.success());
    for name in [
        "solve.json",
        "coeffs_0.csv",
        "samples_0.csv",
        "trajectory_0.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn worked_example_recovers_the_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        "solve",
        &problems().join("worked_example.txt"),
        &["--residual-range", "-2:2"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&tmp.path().join("solve.json"));
    let dim = r["accepted_dimension"].as_u64().unwrap() as usize;
    assert!(dim >= 1);
    let fs_: Vec<ReconstructedFunction> = (0..dim)
        .map(|i| {
            let text = fs::read_to_string(tmp.path().join(format!("coeffs_{i}.csv"))).unwrap();
            ReconstructedFunction::from_values(-8, parse_coefficients(&text).unwrap(), 0)
        })
        .collect();
    let evals: Vec<Box<dyn Fn(f64) -> Complex64 + '_>> = fs_
        .iter()
        .map(|f| Box::new(move |x| f.eval(x)) as Box<dyn Fn(f64) -> Complex64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> Complex64> = evals.iter().map(|b| b.as_ref()).collect();
    let target = |x: f64| Complex64::new((x * x * x + x).cos() / (3.0 * x * x + 1.0), 0.0);
    let fit = project_onto_span(&refs, target, &uniform_grid(-2.0, 2.0, 401)).unwrap();
    assert!(fit.rel_l2_err < 1e-2, "{}", fit.rel_l2_err);
}

#[test]
fn verify_round_trip_and_truncation() {
    let tmp = TempDir::new().unwrap();
    let p = problems().join("hermite.txt");
    assert!(run_in(&tmp.path().join("solve"), "solve", &p, &[])
        .status
        .success());
    let coeffs = tmp.path().join("solve/coeffs_0.csv");
    let text = fs::read_to_string(&coeffs).unwrap();
    let values = parse_coefficients(&text).unwrap();
    assert_eq!(coefficients_csv(&values), text);

    let full = tmp.path().join("full");
    let out = run_in(&full, "verify", &p, &["--coeffs", coeffs.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let solved = json(&tmp.path().join("solve/solve.json"));
    let verified = json(&full.join("verify.json"));
    assert_eq!(
        solved["vectors"][0]["residual_sup"],
        verified["function"]["residual_sup"]
    );

    let half = tmp.path().join("half.csv");
    fs::write(&half, coefficients_csv(&values[..values.len() / 2])).unwrap();
    let out_half = tmp.path().join("half");
    assert!(run_in(
        &out_half,
        "verify",
        &p,
        &["--coeffs", half.to_str().unwrap()]
    )
    .status
    .success());
    let r_full = verified["function"]["residual_sup"].as_f64().unwrap();
    let r_half = json(&out_half.join("verify.json"))["function"]["residual_sup"]
        .as_f64()
        .unwrap();
    assert!(r_half > r_full, "{r_half} vs {r_full}");
}

#[test]
fn verify_empty_and_oversized() {
    let tmp = TempDir::new().unwrap();
    let p = problems().join("hermite.txt");
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = run_in(
        &tmp.path().join("e"),
        "verify",
        &p,
        &["--coeffs", empty.to_str().unwrap()],
    );
    assert!(out.status.success());
    let r = json(&tmp.path().join("e/verify.json"));
    assert_eq!(r["function"]["residual_sup"], 0.0);
    assert_eq!(r["function"]["length"], 0);

    let big = tmp.path().join("big.csv");
    fs::write(&big, coefficients_csv(&vec![Complex64::new(1.0, 0.0); 161])).unwrap();
    let out = run_in(
        &tmp.path().join("b"),
        "verify",
        &p,
        &["--coeffs", big.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length mismatch"));
}

#[test]
fn scan_hermite_dips() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        "scan",
        &problems().join("hermite.txt"),
        &["--truncation", "40", "--scan", "0:6:0.25"],
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("scan.csv")).unwrap();
    let sigmas: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(sigmas.len(), 25);
    let dips: Vec<f64> = sigmas
        .windows(3)
        .filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1)
        .map(|w| w[1].0)
        .collect();
    assert_eq!(dips, vec![1.0, 3.0, 5.0]);
}

#[test]
fn scan_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        "scan",
        &problems().join("hermite.txt"),
        &["--scan", "1:0:1"],
    );
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(tmp.path().join("scan.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );

    // P - lambda = 1 - lambda is a nonzero multiple of the identity away
    // from lambda = 1, where it vanishes outright.
    let p = write_problem(tmp.path(), "order: 0\nd0: 1\ntruncation: 20\n");
    let out = run_in(tmp.path(), "scan", &p, &["--scan", "-2:0.75:0.25"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("dips at []"));
    let csv = fs::read_to_string(tmp.path().join("scan.csv")).unwrap();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("1")));
}

#[test]
fn thread_cap_environment() {
    let tmp = TempDir::new().unwrap();
    let p = problems().join("hermite.txt");
    let base = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_psi-spectral"))
            .args([
                "assemble",
                "--problem",
                p.to_str().unwrap(),
                "--out",
                tmp.path().to_str().unwrap(),
            ])
            .env("PSI_SPECTRAL_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(base("1").status.success());
    assert_eq!(base("0").status.code(), Some(2));
}
