use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn deo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deo")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn verify_json_report_shape() {
    let out = deo(&["verify", "--suite", "eta", "--func", "exp:1.0,cos:2:0.3", "--t0=-0.5,0.25"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cases = report["cases"].as_array().unwrap();
    assert!(!cases.is_empty());
    let ids: Vec<&str> = cases.iter().map(|c| c["id"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    for c in cases {
        for key in ["lhs", "rhs", "residual", "pass"] {
            assert!(c.get(key).is_some(), "case lacks {key}");
        }
    }
    let s = &report["summary"];
    assert_eq!(s["total"].as_u64().unwrap() as usize, cases.len());
    assert_eq!(s["failed"], 0);
    assert_eq!(s["pass"], true);
    assert_eq!(report["config"]["seed"], 42);
}

#[test]
fn impossible_tolerance_exits_one() {
    let out = deo(&["verify", "--suite", "square", "--tol", "1e-300"]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["pass"], false);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["verify"][..],
        &["verify", "--suite", "nope"],
        &["verify", "--suite", "chainrule", "--k-range", "3:1"],
        &["verify", "--suite", "all", "--tol", "0"],
        &["wave", "--emit-gnuplot"],
        &["wave", "--nx", "1"],
        &["power", "--a", "1", "--b", "0"],
        &["bogus"],
    ] {
        assert_eq!(code(&deo(args)), 2, "{args:?}");
    }
    assert_eq!(code(&deo(&["--help"])), 0);
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("report.json");
    let out = deo(&["verify", "--suite", "eta", "--output", target.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn wave_writes_csv_and_gnuplot_script() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("wave.csv");
    let out = deo(&[
        "wave", "--i", "3", "--n", "5", "--m", "2", "--nx", "7", "--nt", "5", "--output",
        csv.to_str().unwrap(), "--emit-gnuplot",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // the default k1 is negative, so the envelope grows and the CLI says so
    assert!(!out.stderr.is_empty());

    let body = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "x,t,value");
    assert_eq!(lines.len(), 1 + 7 * 5);
    assert!(!body.contains('\r'));
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0.000000000000e+00");
    assert!(first[2].parse::<f64>().unwrap().is_finite());
    // x-major order
    assert_eq!(lines[2].split(',').next(), Some("0.000000000000e+00"));

    let gp = Path::new(&format!("{}.gp", csv.display())).to_path_buf();
    let script = std::fs::read_to_string(gp).unwrap();
    assert!(script.contains("wave.csv"));
    assert!(script.contains("splot"));
}

#[test]
fn wave_to_stdout_matches_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("w.csv");
    let args = ["wave", "--k1", "0.5", "--k2", "2", "--nx", "4", "--nt", "4"];
    let stdout = deo(&args).stdout;
    let mut with_file = args.to_vec();
    with_file.extend(["--output", csv.to_str().unwrap()]);
    assert_eq!(code(&deo(&with_file)), 0);
    assert_eq!(std::fs::read(&csv).unwrap(), stdout);
}

#[test]
fn power_reports_unit_alpha_for_the_carrier() {
    let out = deo(&["power", "--k", "0", "--n", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(v["numeric"].as_f64().unwrap() > 0.0);
    assert!(v["discrepancy"].as_f64().is_some());
    assert_eq!(v["dispersion_real_residual"].as_f64().unwrap(), 0.0);
}

#[test]
fn verify_is_deterministic() {
    let args = ["verify", "--suite", "chainrule", "--antideriv", "randomized", "--seed", "9"];
    let a = deo(&args);
    let b = deo(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = deo(&["verify", "--suite", "chainrule", "--antideriv", "randomized", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn table_format_lists_cases() {
    let out = deo(&["verify", "--suite", "cube", "--format", "table", "--p-max", "0"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("ladder/")));
    assert!(text.contains("0 failed"));
}
