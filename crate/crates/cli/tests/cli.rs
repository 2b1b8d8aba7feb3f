use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::NamedTempFile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_permbounds"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn matrix_file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn thirds() -> NamedTempFile {
    let t = 1.0 / 3.0;
    matrix_file(&format!("3 3\n{t} {t} {t}\n{t} {t} {t}\n{t} {t} {t}\n"))
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bounds_on_uniform_three_by_three() {
    let f = thirds();
    let v = json(&run(&["bounds", f.path().to_str().unwrap()]));
    let exact = (2.0f64 / 9.0).ln();
    let lower = 6.0 * (2.0f64 / 3.0).ln();
    assert!((v["exact"].as_f64().unwrap() - exact).abs() < 1e-12);
    assert!((v["lower"].as_f64().unwrap() - lower).abs() < 1e-9);
    assert!((v["upper"].as_f64().unwrap() - (lower + 3.0 * 2f64.ln())).abs() < 1e-9);
    assert!(v["orlicz_upper"].as_f64().unwrap() >= exact);
    assert!(v["bregman_upper"].is_null());
    assert_eq!(v["n"], 3);
}

#[test]
fn bregman_appears_for_zero_one_input() {
    let f = matrix_file("3 3\n1 1 0\n0 1 1\n1 0 1\n");
    let v = json(&run(&["bounds", f.path().to_str().unwrap()]));
    assert!((v["exact"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!(v["bregman_upper"].as_f64().unwrap() >= 2f64.ln() - 1e-12);
}

#[test]
fn reads_csv_from_stdin() {
    let mut child = bin()
        .args(["exact", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1,2\n3,4\n").unwrap();
    let v = json(&child.wait_with_output().unwrap());
    assert!((v["value"].as_f64().unwrap() - 10.0).abs() < 1e-12);
    assert_eq!(v["zero"], false);
}

#[test]
fn zero_permanent_is_reported_not_failed() {
    let f = matrix_file("2 2\n1 1\n0 0\n");
    let v = json(&run(&["exact", f.path().to_str().unwrap()]));
    assert_eq!(v["zero"], true);
    assert!(v["log_value"].is_null());
}

#[test]
fn unreadable_input_exits_2() {
    let out = run(&["exact", "/definitely/not/here.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn malformed_input_exits_2() {
    let f = matrix_file("2 2\n1 x\n3 4\n");
    assert_eq!(run(&["exact", f.path().to_str().unwrap()]).status.code(), Some(2));
    let neg = matrix_file("2 2\n1 -1\n3 4\n");
    assert_eq!(run(&["bounds", neg.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let f = thirds();
    let p = f.path().to_str().unwrap();
    assert_eq!(run(&["perm-m", p]).status.code(), Some(2));
    assert_eq!(run(&["perm-m", p, "--m", "4"]).status.code(), Some(2));
    assert_eq!(run(&["scan-conjectures", "--ensemble", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["verify-psi", "--a", "3.5"]).status.code(), Some(2));
    assert_eq!(run(&["approx", p, "--tol", "0"]).status.code(), Some(2));
}

#[test]
fn oversize_exact_exits_3() {
    let row = vec!["1"; 25].join(" ");
    let text = format!("25 25\n{}\n", vec![row; 25].join("\n"));
    let f = matrix_file(&text);
    let out = run(&["exact", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn oversize_bounds_still_succeed_without_exact() {
    let row = vec!["1"; 25].join(" ");
    let text = format!("25 25\n{}\n", vec![row; 25].join("\n"));
    let f = matrix_file(&text);
    let v = json(&run(&["bounds", f.path().to_str().unwrap()]));
    assert!(v["exact"].is_null());
    let lower = v["lower"].as_f64().unwrap();
    let upper = v["upper"].as_f64().unwrap();
    assert!(lower < upper);
}

#[test]
fn perm_m_counts_matchings() {
    let f = matrix_file("3 3\n1 1 1\n1 1 1\n1 1 1\n");
    let p = f.path().to_str().unwrap();
    // K_{3,3}: 9 single edges, 18 two-matchings, 6 perfect matchings
    for (m, want) in [(1, 9.0), (2, 18.0), (3, 6.0)] {
        let v = json(&run(&["perm-m", p, "--m", &m.to_string()]));
        assert!((v["value"].as_f64().unwrap() - want).abs() < 1e-9, "m={m}");
    }
}

#[test]
fn scale_reports_convergence() {
    let f = matrix_file("2 2\n1 2\n3 4\n");
    let v = json(&run(&["scale", f.path().to_str().unwrap(), "--tol", "1e-12"]));
    assert_eq!(v["converged"], true);
    assert!(v["residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn scale_failure_exits_1_after_printing() {
    let f = matrix_file("2 2\n1 1\n0 1\n");
    let out = run(&["scale", f.path().to_str().unwrap(), "--max-iter", "5", "--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], false);
}

#[test]
fn friedland_csv_shape() {
    let out = run(&["friedland", "--k", "3", "--n", "4,6", "--samples", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,k,m,p,log_per_m_mean,pa1_lower,beta_limit,samples,seed")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4 + 6);
    for r in &rows {
        assert_eq!(r.len(), 9);
        let mean: f64 = r[4].parse().unwrap();
        let pa1: f64 = r[5].parse().unwrap();
        assert!(mean >= pa1 - 1e-8);
    }
}

#[test]
fn friedland_p_picks_one_size() {
    let out = run(&["friedland", "--n", "8", "--p", "0.5", "--samples", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("8,2,4,0.5,"));
}

#[test]
fn verify_psi_auto_passes() {
    let out = run(&["verify-psi", "--a", "auto"]);
    let v = json(&out);
    assert_eq!(v["pass"], true);
    for key in ["cond1_min_margin", "cond2_min_margin", "cond3_min_margin"] {
        assert!(v[key].as_f64().unwrap() >= 0.0, "{key}");
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn scan_conjectures_half_power() {
    let v = json(&run(&[
        "scan-conjectures",
        "--conjecture",
        "half-power-upper",
        "--ensemble",
        "ds-random",
        "--n",
        "8",
        "--samples",
        "1000",
    ]));
    let scan = &v[0];
    assert_eq!(scan["samples"], 1000);
    let max_ratio = scan["max_ratio"].as_f64().unwrap();
    let violations = scan["violations"].as_u64().unwrap();
    assert!(max_ratio <= 1.0 || !scan["counterexamples"].as_array().unwrap().is_empty());
    assert_eq!(violations == 0, max_ratio <= 1.0 + 1e-9);
}

#[test]
fn outputs_are_deterministic() {
    let args = ["bench", "--n", "4,5", "--samples", "4", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let s = ["scan-conjectures", "--n", "5", "--samples", "50", "--seed", "3"];
    assert_eq!(run(&s).stdout, run(&s).stdout);
    let f = ["friedland", "--n", "5", "--samples", "10", "--seed", "9"];
    assert_eq!(run(&f).stdout, run(&f).stdout);
}

#[test]
fn seeds_change_samples() {
    let a = run(&["bench", "--n", "4", "--samples", "2", "--seed", "1"]);
    let b = run(&["bench", "--n", "4", "--samples", "2", "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn bench_gaps_have_the_right_sign() {
    let out = run(&["bench", "--n", "4,6", "--samples", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("ensemble,n,sample,bound,side,log_value,log_exact,gap")
    );
    let mut seen = 0;
    for l in lines {
        let c: Vec<&str> = l.split(',').collect();
        let gap: f64 = c[7].parse().unwrap();
        match c[4] {
            "lower" => assert!(gap <= 1e-8, "{l}"),
            "upper" => assert!(gap >= -1e-8, "{l}"),
            _ => {}
        }
        seen += 1;
    }
    assert!(seen > 0);
}

#[test]
fn output_formats() {
    let f = thirds();
    let p = f.path().to_str().unwrap();
    let human = String::from_utf8(run(&["approx", p, "--format", "human"]).stdout).unwrap();
    assert!(human.starts_with("field"));
    assert!(human.contains("log_estimate"));
    let csv = String::from_utf8(run(&["bounds", p, "--format", "csv"]).stdout).unwrap();
    assert!(csv.starts_with("bound,side,log_value,log2_value\n"));
    assert!(csv.contains("\nexact,exact,"));
}
