use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn lsnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsnav")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lsnav-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn unit_tangent_bound_at_r2() {
    let v = json(&lsnav(&["bound", "--unit-tangent", "--m", "1", "--r", "2"]));
    assert_eq!(v["schema"], "v1");
    assert_eq!(v["bound"], 3);
    assert_eq!(v["exact"], true);
}

#[test]
fn product_bound_from_input_file() {
    let input = r#"{"mode": "plain", "components": [
        {"value": 0.0, "complexity": 1},
        {"value": 4.0, "complexity": 2},
        {"value": 4.0, "complexity": 1},
        {"value": 8.0, "complexity": 1}]}"#;
    let path = temp_file("bound.json", input);
    let v = json(&lsnav(&["bound", "--input", path.to_str().unwrap()]));
    assert_eq!(v["bound"], 4);
    let cut = json(&lsnav(&["bound", "--input", path.to_str().unwrap(), "--lambda", "5"]));
    assert_eq!(cut["bound"], 3);
}

#[test]
fn unknown_complexity_is_a_domain_error() {
    let path = temp_file("unknown.json", r#"{"mode": "plain", "components": [{"value": 0.0, "complexity": "unknown"}]}"#);
    let out = lsnav(&["bound", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnknownComplexity"));
}

#[test]
fn critfind_nav_on_circle_pairs() {
    let v = json(&lsnav(&["critfind", "--field", "nav", "--manifold", "sphere:1", "--r", "2", "--seeds", "200"]));
    let values: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 2, "{values:?}");
    assert!(values[0].abs() <= 1e-5 && (values[1] - 4.0).abs() <= 1e-5, "{values:?}");
}

#[test]
fn critfind_ut_f_finds_both_signs() {
    let v = json(&lsnav(&["critfind", "--field", "ut-f", "--manifold", "stiefel:4", "--seeds", "100"]));
    let values: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 2, "{values:?}");
    assert!((values[0] + 1.0).abs() <= 1e-6 && (values[1] - 1.0).abs() <= 1e-6, "{values:?}");
}

#[test]
fn pairs_on_triaxial_ellipsoid() {
    let v = json(&lsnav(&["pairs", "--ellipsoid", "1,2,3"]));
    assert_eq!(v["alpha"], 3);
    assert_eq!(v["census"]["status"], "found");
}

#[test]
fn pairs_on_round_sphere_is_a_continuum() {
    let v = json(&lsnav(&["pairs", "--manifold", "sphere:2", "--seeds", "3000"]));
    assert_eq!(v["alpha"], "continuum");
}

#[test]
fn plan_product_from_tuple_file() {
    let path = temp_file("tuple.json", "[[0.6, 0.8], [-0.6, -0.8], [0.6, 0.8]]");
    let v = json(&lsnav(&["plan", "--tuple", path.to_str().unwrap(), "--manifold", "sphere:1"]));
    assert_eq!(v["planner"], "product");
    assert_eq!(v["r"], 3);
    let csv = lsnav(&["plan", "--tuple", path.to_str().unwrap(), "--manifold", "sphere:1", "--format", "csv", "--samples", "8"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.lines().count() > 8);
}

#[test]
fn plan_sigma_u_from_tuple_file() {
    let path = temp_file("frames.json", "[[1, 0, 0, 0, 0, -1, 0, 0], [1, 0, 0, 0, 0, 1, 0, 0]]");
    let v = json(&lsnav(&["plan", "--tuple", path.to_str().unwrap(), "--manifold", "stiefel:4"]));
    assert_eq!(v["planner"], "sigma-u");
}

#[test]
fn plan_rejects_generic_tuple() {
    let path = temp_file("generic.json", "[[1.0, 0.0], [0.0, 1.0]]");
    let out = lsnav(&["plan", "--tuple", path.to_str().unwrap(), "--manifold", "sphere:1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixed_seed_output_is_byte_identical() {
    let args = ["critfind", "--field", "nav", "--manifold", "product:1,3", "--r", "2", "--seeds", "60", "--seed", "7"];
    let a = lsnav(&args);
    let b = lsnav(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["pairs", "--ellipsoid", "1,2,3", "--seeds", "500", "--seed", "3"];
    let one = Command::new(env!("CARGO_BIN_EXE_lsnav")).args(args).env("LSNAV_THREADS", "1").output().unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_lsnav")).args(args).env("LSNAV_THREADS", "4").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(lsnav(&["bound"]).status.code(), Some(2));
    assert_eq!(lsnav(&["critfind", "--field", "nope"]).status.code(), Some(2));
    assert_eq!(lsnav(&["critfind", "--field", "nav"]).status.code(), Some(2));
    assert_eq!(lsnav(&["critfind", "--field", "nav", "--manifold", "cube:3"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1() {
    let out = lsnav(&["critfind", "--field", "nav", "--manifold", "ellipsoid:1,2,3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WrongSpec"));
}

#[test]
fn manifold_accepts_inline_json() {
    let v = json(&lsnav(&["critfind", "--field", "height", "--manifold", r#"{"kind": "sphere", "n": 2}"#, "--seeds", "50"]));
    let values: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 2, "{values:?}");
}

#[test]
fn help_names_the_construct() {
    let out = lsnav(&["critfind", "--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("navigation function"));
    let out = lsnav(&["bound", "--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("topological complexity"));
}

#[test]
fn verify_single_criterion() {
    let v = json(&lsnav(&["verify", "--criteria", "10"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"][0]["id"], 10);
}
