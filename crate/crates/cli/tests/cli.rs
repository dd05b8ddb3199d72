use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_localdepth")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn depth_of_three_points() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "x\n0\n1\n2\n");
    write(dir.path(), "q.csv", "1\n");
    let o = run(dir.path(), &["depth", "--data", "a.csv", "--queries", "q.csv", "--tau", "1.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x1,depth,f_tau"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[..2], ["1", "0.6666666666666666"]);
    let f: f64 = row[2].parse().unwrap();
    assert!((f - (2.0f64 / 3.0).sqrt() / 1.5).abs() < 1e-12);
}

#[test]
fn empty_queries_give_header_only() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "0\n1\n2\n");
    write(dir.path(), "q.csv", "x\n");
    let o = run(dir.path(), &["depth", "--data", "a.csv", "--queries", "q.csv", "--tau", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "x1,depth,f_tau\n");
}

#[test]
fn bad_cell_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "0\n1\nfoo\n");
    let o = run(dir.path(), &["depth", "--data", "bad.csv", "--tau", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("column 1"), "{err}");
    let o = run(dir.path(), &["depth", "--data", "missing.csv", "--tau", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["depth"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["sample", "--n", "x"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn cluster_toy() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", "0\n0.1\n0.2\n5\n5.1\n5.2\n");
    let o = run(dir.path(), &["cluster", "--data", "toy.csv", "--q", "0.4", "--s", "2", "--r", "0.5", "--summary", "s.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("point,terminal,cluster,mode_x1\n"));
    let terminals: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(terminals, ["1", "1", "1", "4", "4", "4"]);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["k"], 2);
    assert_eq!(s["modes"][1]["index"], 4);
}

#[test]
fn cluster_identical_points_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "same.csv", "1,1\n1,1\n1,1\n");
    let o = run(dir.path(), &["cluster", "--data", "same.csv", "--summary", "s.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["k"], 1);
    assert_eq!(s["q"], 0.05);
    assert_eq!(s["s"], 30);
    assert_eq!(s["r"], 0.05);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.csv", "0\n0.1\n0.2\n5\n5.1\n5.2\n");
    write(dir.path(), "cfg.json", r#"{"data": "toy.csv", "q": 0.4, "s": 2, "r": 0.5, "summary": "s.json"}"#);
    let o = run(dir.path(), &["cluster", "--config", "cfg.json", "--s", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["q"], 0.4);
    assert_eq!(s["s"], 3);
    write(dir.path(), "bad.json", r#"{"bogus": 1}"#);
    let o = run(dir.path(), &["cluster", "--config", "bad.json", "--data", "toy.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_single_replication_has_no_sd() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["bench", "--density", "bimodal", "--n", "100", "--replications", "1", "--output", "b.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("bimodal | LLD-0.05-30 | H "));
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert!(b["row"]["report"]["hausdorff"]["sd"].is_null());
    assert_eq!(b["row"]["true_k"], 2);
}

#[test]
fn plotdata_grids() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["plotdata", "--density", "normal", "--points", "1", "--lo=-1", "--hi", "1", "--taus", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.starts_with("x1,density,f_tau_1\n0,0.3989422804014327,"));
    write(dir.path(), "p3.csv", "0,0,0\n1,1,1\n");
    let o = run(dir.path(), &["plotdata", "--data", "p3.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["plotdata", "--data", "p3.csv", "--density", "normal"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["sample", "--density", "bimodal", "--n", "50", "--seed", "9"]);
    let b = run(dir.path(), &["sample", "--density", "bimodal", "--n", "50", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("x1,x2\n"));
    assert_eq!(stdout(&a).lines().count(), 51);
}

#[test]
fn constants_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["constants", "--family", "lens", "--dim", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["lambda1"], 1.0);
    assert!((c["lambda1_star_sq"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn validate_single_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate", "--check", "symmetry"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["runtime_seconds"], 0.0);
    let o = run(dir.path(), &["validate", "--list"]);
    assert!(stdout(&o).lines().any(|l| l == "metrics-oracle"));
    assert_eq!(run(dir.path(), &["validate", "--check", "nope"]).status.code(), Some(1));
}

#[test]
fn recipe_listing_and_unknown_id() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["recipe", "--list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 12);
    assert_eq!(run(dir.path(), &["recipe", "no-such-recipe"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["recipe"]).status.code(), Some(1));
}

#[test]
fn recipe_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = |threshold: &str| {
        format!(
            r#"{{"id": "tiny", "version": 1, "description": "symmetric normal",
                "tasks": {{"sym": {{"kind": "symmetry_stationary", "density": "normal", "tau": 1.0}}}},
                "acceptance": [{{"metric": "sym.passed", "comparator": "==", "threshold": {threshold}}}]}}"#
        )
    };
    write(dir.path(), "ok.json", &recipe("1"));
    let o = run(dir.path(), &["recipe", "--file", "ok.json", "--output", "rep.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["runtime_seconds"], 0.0);
    write(dir.path(), "fail.json", &recipe("0"));
    assert_eq!(run(dir.path(), &["recipe", "--file", "fail.json"]).status.code(), Some(3));
}
