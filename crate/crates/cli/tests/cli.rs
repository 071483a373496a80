use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chowkit::bracket_closure::ClosureReport;
use chowkit::convex::{ConeResult, MackeyReport, SeparationCertificate};
use chowkit::flows::{apply_word, CircleDiffeo, DEFAULT_GRID};
use chowkit::steering::{diffeo_distance, SteeringResult};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chowkit")).args(args).output().expect("spawn chowkit")
}

fn run_to(dir: &TempDir, name: &str, args: &[&str]) -> (Output, String) {
    let out = dir.path().join(name);
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    full.extend(["--output", &out_s]);
    let o = run(&full);
    let text = fs::read_to_string(&out).unwrap_or_default();
    (o, text)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn closure_low_modes_spans_cap_three() {
    let dir = TempDir::new().unwrap();
    let fam = data("family_low_modes.json");
    let (o, text) = run_to(&dir, "c.json", &["closure", "--input", path(&fam), "--cap", "3", "--depth", "8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: ClosureReport = serde_json::from_str(&text).unwrap();
    assert!(report.spanning);
    assert_eq!(report.rank, 7);
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
}

#[test]
fn closure_mode_two_family_stays_small() {
    let dir = TempDir::new().unwrap();
    let fam = data("family_mode2.json");
    let (o, text) = run_to(&dir, "c.json", &["closure", "--input", path(&fam), "--cap", "8", "--depth", "6"]);
    assert_eq!(code(&o), 0);
    let report: ClosureReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.rank, 3);
    assert!(!report.spanning);
    assert!(!report.spanned_modes.contains(&1));
}

#[test]
fn closure_rank_at_point() {
    let dir = TempDir::new().unwrap();
    let fam = data("heisenberg.json");
    let (o, text) = run_to(&dir, "r.json", &["closure", "--input", path(&fam), "--point", "0,0,0", "--depth", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["rank"], 3);
    assert_eq!(v["dim"], 3);
}

#[test]
fn bracket_of_sin_cos_is_rotation_field() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    fs::write(&input, r#"{"x": "sin1", "y": "cos1"}"#).unwrap();
    let (o, text) = run_to(&dir, "b.json", &["bracket", "--input", path(&input)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let b: chowkit::trig_fields::TrigPoly = serde_json::from_value(v["bracket"].clone()).unwrap();
    assert_eq!(b, chowkit::trig_fields::TrigPoly::constant(chowkit::rational::q1()));
}

#[test]
fn zero_field_flow_returns_input() {
    let dir = TempDir::new().unwrap();
    let word = dir.path().join("w.json");
    fs::write(&word, r#"[{"field": {"c0": "0", "cos": [], "sin": []}, "t": 1.5}]"#).unwrap();
    let start = data("rotation_0.3.csv");
    let (o, text) = run_to(&dir, "out.csv", &["flow", "--input", path(&word), "--diffeo", path(&start)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let phi = CircleDiffeo::from_csv(&fs::read_to_string(&start).unwrap()).unwrap();
    let out = CircleDiffeo::from_csv(&text).unwrap();
    assert_eq!(out.lift(), phi.lift());
}

#[test]
fn flow_matches_library_and_writes_trace() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    let (o, text) = run_to(
        &dir,
        "out.csv",
        &["flow", "--input", path(&data("word.json")), "--grid", "64", "--trace", path(&trace)],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let word: chowkit::flows::FlowWord = serde_json::from_str(&fs::read_to_string(data("word.json")).unwrap()).unwrap();
    let want = apply_word(&word, &CircleDiffeo::identity(64)).unwrap();
    assert_eq!(CircleDiffeo::from_csv(&text).unwrap(), want);
    let rows = fs::read_to_string(&trace).unwrap();
    assert_eq!(rows.lines().count(), 1 + 1 + word.len());
    assert!(rows.starts_with("step,sup_displacement\n0,0\n"));
}

#[test]
fn residual_errors_shrink() {
    let dir = TempDir::new().unwrap();
    let (o, text) = run_to(&dir, "r.json", &["residual", "--input", path(&data("residual.json"))]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let errs: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["error"].as_f64().unwrap()).collect();
    assert_eq!(errs.len(), 4);
    for w in errs.windows(2) {
        let r = w[1] / w[0];
        assert!((0.3..=0.7).contains(&r), "ratio {r}");
    }
}

#[test]
fn steer_rotation_target_converges() {
    let dir = TempDir::new().unwrap();
    let target = data("rotation_0.3.csv");
    let trace = dir.path().join("traj.csv");
    let (o, text) = run_to(
        &dir,
        "s.json",
        &["steer", "--target", path(&target), "--epsilon", "1e-2", "--budget", "400", "--trace", path(&trace)],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let res: SteeringResult = serde_json::from_str(&text).unwrap();
    assert!(res.converged);
    assert!(res.achieved_error <= 1e-2);
    let tgt = CircleDiffeo::from_csv(&fs::read_to_string(&target).unwrap()).unwrap();
    let reached = apply_word(&res.word, &CircleDiffeo::identity(DEFAULT_GRID)).unwrap();
    let err = diffeo_distance(&reached, &tgt).unwrap();
    assert_eq!(err, res.achieved_error);
    let last = fs::read_to_string(&trace).unwrap().lines().last().unwrap().to_string();
    assert_eq!(last.split(',').nth(1).unwrap().parse::<f64>().unwrap(), err);
}

#[test]
fn steer_small_budget_exits_two_but_writes_artifact() {
    let dir = TempDir::new().unwrap();
    let (o, text) = run_to(
        &dir,
        "s.json",
        &["steer", "--target", path(&data("rotation_0.3.csv")), "--budget", "5"],
    );
    assert_eq!(code(&o), 2);
    let res: SteeringResult = serde_json::from_str(&text).unwrap();
    assert!(!res.converged);
    assert!(res.word.len() <= 5);
}

#[test]
fn convex_commands() {
    let dir = TempDir::new().unwrap();
    let (o, text) = run_to(
        &dir,
        "m.json",
        &["minkowski", "--input", path(&data("unit_box.json")), "--points", path(&data("points.csv"))],
    );
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["symmetric"], true);

    let (o, text) = run_to(&dir, "s.json", &["separate", "--input", path(&data("separate.json"))]);
    assert_eq!(code(&o), 0);
    let cert: SeparationCertificate = serde_json::from_str(&text).unwrap();
    assert!(cert.alpha < cert.beta);
    assert_eq!(serde_json::to_string_pretty(&cert).unwrap() + "\n", text);

    let (o, text) = run_to(&dir, "c.json", &["cone", "--input", path(&data("cone.json"))]);
    assert_eq!(code(&o), 0);
    let cone: ConeResult = serde_json::from_str(&text).unwrap();
    assert_eq!(cone.vertex, vec![0.0, 0.5]);
    assert_eq!(serde_json::to_string_pretty(&cone).unwrap() + "\n", text);

    let (o, text) = run_to(&dir, "k.json", &["mackey", "--input", path(&data("mackey_geometric.json"))]);
    assert_eq!(code(&o), 0);
    let rep: MackeyReport = serde_json::from_str(&text).unwrap();
    assert!(rep.is_cauchy_prefix);
    assert_eq!(serde_json::to_string_pretty(&rep).unwrap() + "\n", text);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["closure".into(), "--input".into(), data("family_low_modes.json").display().to_string(), "--cap".into(), "4".into()],
        vec!["flow".into(), "--input".into(), data("word.json").display().to_string()],
        vec!["residual".into(), "--input".into(), data("residual.json").display().to_string()],
        vec!["cone".into(), "--input".into(), data("cone.json").display().to_string()],
        vec!["steer".into(), "--target".into(), data("rotation_0.3.csv").display().to_string(), "--budget".into(), "60".into()],
    ];
    for (i, args) in cases.iter().enumerate() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (_, a) = run_to(&dir, &format!("{i}a"), &args);
        let (_, b) = run_to(&dir, &format!("{i}b"), &args);
        assert!(!a.is_empty(), "{args:?}");
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn stdout_carries_artifact_without_output_flag() {
    let o = run(&["separate", "--input", path(&data("separate.json"))]);
    assert_eq!(code(&o), 0);
    let cert: SeparationCertificate = serde_json::from_slice(&o.stdout).unwrap();
    assert!(cert.distance > 0.0);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("separate:"));
}

#[test]
fn domain_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let inter = dir.path().join("i.json");
    fs::write(&inter, r#"{"a": [[0.5, 0.0]], "b": [[0,0],[1,0],[0,1]]}"#).unwrap();
    let o = run(&["separate", "--input", path(&inter)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let lopsided = dir.path().join("c.json");
    fs::write(
        &lopsided,
        r#"{"b": [[0,0],[0,0.5]], "a1": [0,0], "x0": [0,1], "gauge": {"dim": 2, "halfspaces": [[1,0],[-1,0],[0,1],[0,-0.5]]}}"#,
    )
    .unwrap();
    let o = run(&["cone", "--input", path(&lopsided)]);
    assert_eq!(code(&o), 2);
    let o = run(&["cone", "--input", path(&lopsided), "--symmetrize"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let o = run(&["closure", "--input", path(&dir.path().join("missing.json"))]);
    assert_eq!(code(&o), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let o = run(&["separate", "--input", path(&bad)]);
    assert_eq!(code(&o), 1);
    let o = run(&["closure"]);
    assert_eq!(code(&o), 1);
    // An unbounded body is rejected while parsing.
    let unbounded = dir.path().join("u.json");
    fs::write(&unbounded, r#"{"dim": 2, "halfspaces": [[1,0],[-1,0]]}"#).unwrap();
    let o = run(&["minkowski", "--input", path(&unbounded), "--points", path(&data("points.csv"))]);
    assert_eq!(code(&o), 1);
}
