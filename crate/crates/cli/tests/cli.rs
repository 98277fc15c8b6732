use std::process::{Command, Output};

use serde_json::Value;

fn weil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weil")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON output")
}

#[test]
fn fourier_transform_of_the_integers() {
    let o = weil(&["compute", "W(tau1)", "atom(0,0)", "--p", "3", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["cell"], serde_json::json!([0, 0]));
    assert_eq!(v["spec"], "1*atom(0,0)");
}

#[test]
fn dilation_by_p() {
    let o = weil(&["compute", "W(g(3))", "atom(0,0)", "--p", "3", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["cell"], serde_json::json!([1, 1]));
    // √3 = 2ζ₃₆³ − ζ₃₆⁹ in the power basis
    assert_eq!(v["support"][0]["value"]["coeffs"], serde_json::json!(["0", "0", "0", "2", "0", "0", "0", "0", "0", "-1"]));
}

#[test]
fn heisenberg_translation_multiplies_by_a_character() {
    let o = weil(&["compute", "S(y(1/3),0)", "atom(0,0)", "--p", "3", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["support"].as_array().unwrap().len(), 3);
}

#[test]
fn witnesses_reproduce_through_compute() {
    // a spec printed by the report parses back to the same function
    let o = weil(&["compute", "id", "1/2*zeta(3)*atom(1/3,0) + atom(0,1)", "--p", "3", "--format", "json"]);
    let spec = json(&o)["spec"].as_str().unwrap().to_string();
    let again = weil(&["compute", "id", &spec, "--p", "3", "--format", "json"]);
    assert_eq!(json(&again)["spec"], spec.as_str());
}

#[test]
fn usage_errors_stop_before_computing() {
    let o = weil(&["verify", "--p", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let o = weil(&["verify", "--cell", "2,1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = weil(&["verify", "--p", "9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = weil(&["compute", "W(tau1)*V", "atom(0,0)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position 8"));
}

#[test]
fn measures_suite_passes() {
    let o = weil(&["verify", "--suite", "measures", "--p", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["summary"]["failed"], 0);
    assert!(v["summary"]["total"].as_u64().unwrap() > 0);
}

#[test]
fn main_theorem_on_the_default_cell() {
    let o = weil(&[
        "verify", "--suite", "main-theorem", "--p", "3", "--N", "2", "--cell", "0,1", "--words", "3", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json(&o);
    assert!(v["records"].as_array().unwrap().iter().all(|r| r["name"] == "rational-conjugate"));
}

#[test]
fn report_to_file_and_text() {
    let dir = std::env::temp_dir().join(format!("weil-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let o = weil(&[
        "verify", "--suite", "descent", "--check", "splitting", "--out", path.to_str().unwrap(), "--format", "json",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["records"].as_array().unwrap().iter().all(|r| r["name"] == "splitting"));
    let o = weil(&["verify", "--suite", "descent"]);
    assert!(stdout(&o).contains("total"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn norm_decompose_describe() {
    let o = weil(&["norm-solve", "--p", "13", "--format", "json"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["pass"], true);
    let o = weil(&["decompose", "tau1*unip(1/3)*levi(2)", "--format", "json"]);
    let v = json(&o);
    assert_eq!(v["rank"], 1);
    assert_eq!(v["product_matches"], true);
    let o = weil(&["describe", "--p", "3", "--format", "json"]);
    assert_eq!(json(&o)["transversal"].as_array().unwrap().len(), 3);
}
