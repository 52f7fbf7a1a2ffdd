use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlsylv"))
}

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const OPEN_LOOP: &str = r#"{
  "kind": "verify_only",
  "name": "open-loop",
  "variables": {"x": ["x1", "x2"]},
  "plant": {"f": ["-x1 - x1^2/2 + x1*x2 + 2*x2 - x2^2", "x2 - x2^2/2"], "g": [["1"], ["1"]]},
  "checks": [
    {"label": "pair 1", "field": "f", "side": "right", "lambda": "-1 - x1 + x2", "v": ["1", "0"]},
    {"label": "pair 2", "field": "f", "side": "right", "lambda": "1 - x2", "v": ["1", "1"]}
  ]
}"#;

#[test]
fn verify_eig_open_loop_pairs_pass() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    fs::write(&file, OPEN_LOOP).unwrap();
    let o = run(&["verify-eig", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("open-loop-eigen.json")).unwrap()).unwrap();
    for r in report.as_array().unwrap() {
        assert_eq!(r["max_residual"].as_f64(), Some(0.0));
        assert_eq!(r["verdict"].as_bool(), Some(true));
    }
}

#[test]
fn verify_eig_perturbed_eigenvalue_fails_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    fs::write(&file, OPEN_LOOP.replace("\"1 - x2\"", "\"1 - 1.001*x2\"")).unwrap();
    let o = run(&["verify-eig", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_expr = dir.path().join("bad.json");
    fs::write(&bad_expr, OPEN_LOOP.replace("1 - x2", "1 - x3")).unwrap();
    let o = run(&["verify-eig", bad_expr.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checks[1].lambda"));

    let bad_json = dir.path().join("broken.json");
    fs::write(&bad_json, "{ not json").unwrap();
    assert_eq!(code(&run(&["verify-eig", bad_json.to_str().unwrap()], dir.path())), 1);

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&run(&["verify-eig", missing.to_str().unwrap()], dir.path())), 1);

    let g_rows = dir.path().join("g.json");
    fs::write(&g_rows, OPEN_LOOP.replace(r#"[["1"], ["1"]]"#, r#"[["1"], ["1"], ["1"]]"#)).unwrap();
    let o = run(&["verify-eig", g_rows.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("plant.g"));

    // Wrong verb for the problem kind.
    let o = run(&["assign-left", problems().join("example1.json").to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn reproduce_example1_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "example1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example1-assignment.json")).unwrap()).unwrap();
    assert_eq!(rep["verdict"], true);
    assert_eq!(rep["validity"], "global");
}

#[test]
fn reproduce_example1_preserve_reports_the_preserved_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "example1-preserve"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example1-preserve-assignment.json")).unwrap()).unwrap();
    let pres = &rep["preservation_checks"][0];
    assert_eq!(pres["verdict"], true);
    assert_eq!(pres["preservation"]["max_residual"].as_f64(), Some(0.0));
    let basin: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example1-preserve-basin.json")).unwrap()).unwrap();
    assert_eq!(basin["fraction"].as_f64(), Some(1.0));
}

#[test]
fn reproduce_motivating_writes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "motivating"], dir.path());
    // The stated eigenpairs of this example do not satisfy the identity.
    assert_eq!(code(&o), 2);
    let csv = fs::read_to_string(dir.path().join("motivating-sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "b,peak_norm,settling_time,final_norm,converged,halving_error");
    assert_eq!(lines.len(), 6);
    for b in 0..5 {
        assert!(dir.path().join(format!("motivating-trace-b{b}.csv")).exists());
    }
    assert!(dir.path().join("motivating-eigen.json").exists());
}

#[test]
fn reproduce_observer_writes_the_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "observer"], dir.path());
    assert_eq!(code(&o), 2);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("dual Sylvester equation"));
    let csv = fs::read_to_string(dir.path().join("observer-observer.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,xi1,xi2\n"));
    let trace = fs::read_to_string(dir.path().join("observer-trace.csv")).unwrap();
    let last: Vec<f64> = trace.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!((last[0] - 10.0).abs() < 1e-9);
    assert!(last[3].hypot(last[4]) < 1e-3);
}

#[test]
fn reproductions_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["reproduce", "example1"], a.path());
    run(&["reproduce", "example1"], b.path());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn overrides_reach_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let file = problems().join("example1.json");
    let o = run(&["solve-sylvester", file.to_str().unwrap(), "--degree", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example1-sylvester.json")).unwrap()).unwrap();
    assert_eq!(rep["solution"]["truncation_degree"], 3);
}

#[test]
fn linear_problem_places_the_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let file = problems().join("linear-double-integrator.json");
    let o = run(&["solve-sylvester", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn bundled_files_load_through_the_file_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let f = problems().join("observer.json");
    let o = run(&["assign-left", f.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    let f = problems().join("example1-preserve.json");
    let o = run(&["assign-right", f.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let f = problems().join("motivating.json");
    let o = run(&["simulate", f.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
}
