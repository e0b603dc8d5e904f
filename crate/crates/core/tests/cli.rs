use std::f64::consts::LN_2;
use std::fs;

use thermoscope::cli::{run_with, EXIT_BUDGET, EXIT_FLAGGED, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    run_env(args, None)
}

fn run_env(args: &[&str], workers: Option<&str>) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("thermoscope").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(argv, workers.map(String::from), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Value of `column` in the single data row of a CSV document.
fn field(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    row[i].to_string()
}

fn midpoint(csv: &str) -> f64 {
    field(csv, "midpoint").parse().unwrap()
}

#[test]
fn pressure_at_half_matches_closed_form() {
    let (code, out, _) = run(&["pressure", "--c", "0.5", "--t", "0.25"]);
    assert_eq!(code, EXIT_OK);
    assert!((midpoint(&out) - 0.5 * LN_2).abs() < 1e-3, "{out}");
}

#[test]
fn entropy_at_zero_temperature() {
    let (code, out, _) = run(&["pressure", "--c", "0.3", "--t", "0"]);
    assert_eq!(code, EXIT_OK);
    assert!((midpoint(&out) - LN_2).abs() < 1e-4, "{out}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let (code, _, err) = run(&["pressure", "--badflag"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn bad_values_are_usage_errors() {
    assert_eq!(run(&["pressure", "--c", "abc", "--t", "0"]).0, EXIT_USAGE);
    assert_eq!(run(&["--depth-min", "12", "--depth-max", "10", "pressure", "--c", "0", "--t", "0"]).0, EXIT_USAGE);
    assert_eq!(run(&["--set", "nonsense=1", "pressure", "--c", "0", "--t", "0"]).0, EXIT_USAGE);
    assert_eq!(run(&["birkhoff", "--c", "1/2", "--beta-min", "-3", "--beta-max", "0"]).0, EXIT_USAGE);
}

#[test]
fn divergent_row_exits_flagged_but_still_prints() {
    let (code, out, _) = run(&["--depth-max", "12", "pressure", "--c", "0", "--t", "-1"]);
    assert_eq!(code, EXIT_FLAGGED);
    assert_eq!(field(&out, "divergent"), "true");
    assert_eq!(field(&out, "midpoint"), "");
}

#[test]
fn oversized_table_exceeds_budget() {
    let (code, _, err) = run(&["masses", "--c", "0", "--depth", "20"]);
    assert_eq!(code, EXIT_BUDGET, "{err}");
}

#[test]
fn output_is_byte_identical_across_runs_and_workers() {
    let args = ["scan", "--t", "0.5", "--grid", "16"];
    let (c1, a, _) = run_env(&args, Some("1"));
    let (c2, b, _) = run_env(&args, Some("3"));
    assert_eq!(c1, EXIT_OK);
    assert_eq!(c2, EXIT_OK);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 17);
}

#[test]
fn dyadic_syntax_is_exact_and_rationals_get_a_note() {
    let (_, exact, err) = run(&["pressure", "--c", "1/2^1", "--t", "1"]);
    assert!(err.is_empty(), "{err}");
    assert!(midpoint(&exact).abs() < 1e-3);
    let (code, out, err) = run(&["pressure", "--c", "1/3", "--t", "0"]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("not dyadic"), "{err}");
    assert!(out.starts_with("c,t,depth"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# coarse\ndepth_min = 6\ndepth_max = 8\nbracket_tol = 0.5\n").unwrap();
    let p = path.to_str().unwrap();
    let (_, out, _) = run(&["--config", p, "pressure", "--c", "0.3", "--t", "1"]);
    assert_eq!(field(&out, "depth"), "7");
    let (_, out, _) = run(&["--config", p, "--depth-max", "6", "pressure", "--c", "0.3", "--t", "1"]);
    assert_eq!(field(&out, "depth"), "6");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let (code, out, _) = run(&["--out", path.to_str().unwrap(), "pressure", "--c", "0.5", "--t", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let written = fs::read_to_string(&path).unwrap();
    assert!(midpoint(&written).abs() < 1e-3);
}

#[test]
fn json_envelope() {
    let (code, out, _) = run(&["--format", "json", "endpoints", "--c", "1/2", "--depth", "8"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "endpoints");
    let beta = v["result"]["beta_bracket"][1].as_f64().unwrap();
    assert!(beta.abs() < 1e-4);
}

#[test]
fn every_subcommand_runs() {
    let cases: &[&[&str]] = &[
        &["curve", "--c", "0.3", "--t-min", "0", "--t-max", "2", "--t-steps", "5"],
        &["birkhoff", "--c", "0.3", "--beta-min", "-2", "--beta-max", "-1", "--steps", "3"],
        &["lq", "--c", "0", "--q", "2"],
        &["lq-direct", "--c", "0", "--q", "2", "--n-min", "6", "--n-max", "9"],
        &["masses", "--c", "0.3", "--depth", "3"],
        &["diffcheck", "--c", "0", "--lags", "3"],
    ];
    for args in cases {
        let (code, out, err) = run(args);
        assert!(code == EXIT_OK || code == EXIT_FLAGGED, "{args:?}: {code} {err}");
        assert!(out.lines().count() >= 2, "{args:?}: {out}");
    }
}
