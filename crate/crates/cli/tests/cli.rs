use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qcur(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcur")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn csv_row(text: &str, key: &str) -> Vec<String> {
    text.lines()
        .find(|l| l.split(',').next() == Some(key))
        .unwrap_or_else(|| panic!("no row {key} in\n{text}"))
        .split(',')
        .map(str::to_string)
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn fig2b_rows() {
    let o = qcur(&["fig2b", "--steps", "4", "--noise-p", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("q,sivp_ideal,sivp_noisy"));
    assert_eq!(csv_row(&text, "0.5")[1], "1");
    assert_eq!(csv_row(&text, "0")[1], "0");
    assert!((num(&csv_row(&text, "0.25")[1]) - 0.8112781).abs() < 1e-7);
}

#[test]
fn fig2c_rows() {
    let o = qcur(&["fig2c", "--steps", "10"]);
    let text = stdout(&o);
    assert_eq!(csv_row(&text, "1")[1], "1");
    assert_eq!(csv_row(&text, "0.5")[1], "0");
    assert!((num(&csv_row(&text, "0.9")[1]) - 0.5310044).abs() < 1e-7);
    let noisy = num(&csv_row(&text, "1")[2]);
    assert!(noisy < 1.0 && noisy > 0.8);
}

#[test]
fn bad_range_is_a_usage_error() {
    assert_eq!(qcur(&["fig2b", "--qmin", "0.7", "--qmax", "0.2"]).status.code(), Some(2));
    assert_eq!(qcur(&["fig2c", "--rmax", "1.5"]).status.code(), Some(2));
    assert_eq!(qcur(&["properties", "nope", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(qcur(&["properties", "gio", "--trials", "10"]).status.code(), Some(2));
}

#[test]
fn oneway_corners() {
    let o = qcur(&["oneway", "--grid-s", "5", "--grid-theta", "5", "--format", "json"]);
    let rows = json(&o);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 25);
    let region = |s: f64, theta: f64| {
        rows.iter()
            .find(|r| (r["s"].as_f64().unwrap() - s).abs() < 1e-9 && (r["theta"].as_f64().unwrap() - theta).abs() < 1e-6)
            .map(|r| r["region"].as_str().unwrap().to_string())
            .unwrap()
    };
    assert_eq!(region(1.0, std::f64::consts::FRAC_PI_4), "I");
    assert_eq!(region(0.75, 0.005), "III");
}

#[test]
fn property_suites() {
    let o = qcur(&["properties", "gio", "--trials", "1000", "--seed", "7"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["failures"], 0);
    let o = qcur(&["properties", "cptp-regression"]);
    assert!(o.status.success());
    let d = &json(&o)["details"];
    assert!((d["sivp_before"].as_f64().unwrap() - 0.061).abs() <= 0.01);
    assert!((d["sivp_after"].as_f64().unwrap() - 0.198).abs() <= 0.01);
}

#[test]
fn incompat_builtins_and_files() {
    let pauli = json(&qcur(&["incompat", "--builtin", "pauli-xz", "--seed", "1"]));
    assert!((pauli["value_lower_bound"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
    let smeared = json(&qcur(&["incompat", "--builtin", "smeared-xz", "--eta", "0.6", "--seed", "1"]));
    assert!(smeared["value_lower_bound"].as_f64().unwrap() <= 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.json");
    fs::write(
        &single,
        r#"{"dim": 2, "settings": [[
            {"re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
            {"re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]}
        ]]}"#,
    )
    .unwrap();
    let o = qcur(&["incompat", single.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["value_lower_bound"].as_f64().unwrap(), 0.0);

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"dim\": 2,\n \"settings\": [[\n oops").unwrap();
    let o = qcur(&["incompat", broken.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name);
    let path_str = path.to_str().unwrap().to_string();
    let mut args = vec!["simulate", "--mean-total", "3.6e5", "-o", &path_str];
    args.extend_from_slice(extra);
    assert!(qcur(&args).status.success());
    path_str
}

fn within_two_sigma(report: &Value, expected: f64) -> bool {
    let s = &report["sivp"];
    let sigma = s["sigma"].as_f64().unwrap().max(1e-12);
    (s["point_estimate"].as_f64().unwrap() - expected).abs() <= 2.0 * sigma + 1e-9
}

#[test]
fn tomography_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let phi = simulate(dir.path(), "phi.csv", &["--q", "0.5", "--seed", "1"]);
    let r = json(&qcur(&["tomo", &phi, "--reps", "200", "--seed", "2"]));
    assert!(within_two_sigma(&r, 1.0), "{r}");

    let mixed = simulate(dir.path(), "mixed.csv", &["--noise-p", "1", "--seed", "3"]);
    let r = json(&qcur(&["tomo", &mixed, "--reps", "200", "--seed", "4"]));
    assert!(within_two_sigma(&r, 0.0), "{r}");

    let noisy = simulate(dir.path(), "noisy.csv", &["--noise-p", "0.026", "--seed", "5"]);
    let r = json(&qcur(&["tomo", &noisy, "--reps", "20", "--seed", "6"]));
    assert!((r["noise_fit_phi_plus"]["p"].as_f64().unwrap() - 0.026).abs() <= 0.005, "{r}");
}

#[test]
fn tomography_rejects_incomplete_settings() {
    let dir = tempfile::tempdir().unwrap();
    let full = simulate(dir.path(), "full.csv", &["--seed", "1"]);
    let text = fs::read_to_string(&full).unwrap();
    let cut: Vec<&str> = text.lines().filter(|l| !l.starts_with("R,L")).collect();
    let path = dir.path().join("cut.csv");
    fs::write(&path, cut.join("\n")).unwrap();
    let o = qcur(&["tomo", path.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("RL"));
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.csv", &["--seed", "9"]);
    let b = simulate(dir.path(), "b.csv", &["--seed", "9"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let run = |out: &str| {
        let o = dir.path().join(out);
        let o = o.to_str().unwrap();
        assert!(qcur(&["tomo", &a, "--reps", "30", "--seed", "3", "-o", o]).status.success());
        fs::read(o).unwrap()
    };
    assert_eq!(run("t1.json"), run("t2.json"));
}

#[test]
fn witness_of_an_assemblage_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("asm.json");
    // Φ+ with X and Z on Alice's side: members are half the eigenprojectors
    fs::write(
        &path,
        r#"{"dim": 2, "n_settings": 2, "n_outcomes": [2, 2], "members": [
            [{"re": [[0.25, 0.25], [0.25, 0.25]], "im": [[0, 0], [0, 0]]},
             {"re": [[0.25, -0.25], [-0.25, 0.25]], "im": [[0, 0], [0, 0]]}],
            [{"re": [[0.5, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
             {"re": [[0, 0], [0, 0.5]], "im": [[0, 0], [0, 0]]}]
        ]}"#,
    )
    .unwrap();
    let o = qcur(&["witness", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["violated"], true);
    assert!((r["report"]["sivp"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}
