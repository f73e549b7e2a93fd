use std::process::{Command, Output};

use serde_json::Value;

fn fqcircle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fqcircle")).args(args).output().expect("binary runs")
}

fn instance(name: &str) -> String {
    format!("{}/../../instances/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn delta_check_example() {
    let out = fqcircle(&["delta-check", "--q", "3", "--Q", "2", "--deg-n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["checked"], 243);
    assert_eq!(v["failures"], 0);
}

#[test]
fn morgenstern_example() {
    for args in [vec!["morgenstern"], vec!["morgenstern", "build"]] {
        let mut a = args.clone();
        a.extend(["--q", "3", "--nu", "2", "--g", "t^2+1"]);
        let out = fqcircle(&a);
        assert_eq!(out.status.code(), Some(0));
        let v = json(&out);
        assert!([720, 360].contains(&v["vertices"].as_u64().unwrap()));
        for key in ["vertices", "degree", "diameter", "gap_estimate", "bound_ratio"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn edge_list_export() {
    let dir = std::env::temp_dir().join(format!("fqcircle-edges-{}", std::process::id()));
    let out = fqcircle(&["morgenstern", "--nu", "2", "--g", "t^2+1", "--edges", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&dir).unwrap();
    std::fs::remove_file(&dir).unwrap();
    assert_eq!(text.lines().count(), 720);
}

#[test]
fn usage_errors_exit_one() {
    let out = fqcircle(&["delta-check", "--Q", "2", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(fqcircle(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(fqcircle(&["morgenstern", "--nu", "2", "--g", "t^2+"]).status.code(), Some(1));
    assert_eq!(fqcircle(&["delta-check", "--Q", "2", "--workers", "0"]).status.code(), Some(1));
    assert_eq!(fqcircle(&["--help"]).status.code(), Some(0));
}

#[test]
fn oversized_runs_exit_three() {
    let out = fqcircle(&["delta-check", "--Q", "2", "--cap", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds cap"));
}

#[test]
fn failed_checks_exit_two() {
    // no primes of degree 0, so the stabilization check has nothing to show
    let out = fqcircle(&["density", "--instance", &instance("density_gt"), "--mode", "stability", "--deg-bound", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn empty_scan_is_header_only_csv() {
    let out = fqcircle(&["threshold-scan", "--deg-g", "1", "--trials", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "trial,deg_g,g,residue,min_deg_any,min_deg_all,ratio_any,ratio_all,sampled\n");
}

#[test]
fn circle_check_reports_both_counts() {
    let out = fqcircle(&["circle-check", "--instance", &instance("four_squares_g1")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["n_direct"], 9);
    assert_eq!(v["n_circle"]["exact"], "9");
    assert_eq!(v["equal"], true);
}

#[test]
fn inline_instance_and_count() {
    let inline = std::fs::read_to_string(instance("five_squares_gt")).unwrap();
    let out = fqcircle(&["count", "--instance", &inline]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["n_direct"], 33);
}

#[test]
fn density_report_follows_the_module_schema() {
    let out = fqcircle(&["density", "--instance", &instance("density_gt"), "--mode", "sigma", "--prime", "t+1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["schema_version", "command", "prime", "levels", "stable_at", "status", "sigma", "sigma_approx", "deviation_constant"]);
    assert_eq!(v["levels"].as_array().unwrap().len(), 2);
}

#[test]
fn output_is_deterministic() {
    let args = ["osc-check", "--suite", "gaussian", "--seed", "7", "--workers", "1"];
    let a = fqcircle(&args);
    let b = fqcircle(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = fqcircle(&["weil-scan", "--deg", "1", "--format", "csv"]);
    let d = fqcircle(&["weil-scan", "--deg", "1", "--format", "csv"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn output_file_and_unwritable_path() {
    let path = std::env::temp_dir().join(format!("fqcircle-out-{}.json", std::process::id()));
    let out = fqcircle(&["dissect", "--Q", "1", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v["failures"], 0);
    let out = fqcircle(&["dissect", "--Q", "1", "--output", "/nonexistent-dir/x.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn floats_carry_twelve_significant_digits() {
    let out = fqcircle(&["morgenstern", "--nu", "2", "--g", "t^2+1"]);
    let v = json(&out);
    let text = v["ramanujan_bound"].to_string();
    let digits = text.chars().filter(|c| c.is_ascii_digit()).count();
    assert!(digits <= 12, "{text}");
    assert!((v["ramanujan_bound"].as_f64().unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-10);
}

#[test]
fn solve_and_optimality_witness() {
    let out = fqcircle(&["solve", "--instance", &instance("solve_five_squares")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["found"], true);
    assert_eq!(v["verified"], true);
    let out = fqcircle(&["optimality-witness", "--q", "3", "--d", "5", "--g", "t^2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["absent"], true);
    assert_eq!(v["companion_verified"], true);
}
