use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semisic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn povm_verify_passes() {
    let r = report(&["povm", "--B", "1/13", "--verify"]);
    assert_eq!(r["command"], "povm");
    assert!(r["residuals"]["max"].as_f64().unwrap() < 1e-10);
    assert_eq!(r["inputs"]["B"], "1/13");
    assert!(r["version"].is_string());
}

#[test]
fn povm_out_of_range_is_usage_error() {
    let out = run(&["povm", "--B", "1/10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
    assert_eq!(run(&["povm", "--B", "x/3"]).status.code(), Some(2));
    assert_eq!(run(&["povm"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn sic_point_has_half_traces() {
    let r = report(&["povm", "--B", "1/12"]);
    for el in r["outputs"]["povm"]["elements"].as_array().unwrap() {
        assert!((el["weight"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn povm_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    report(&["povm", "--B", "1/14", "--csv", path.to_str().unwrap()]);
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["element", "weight", "bloch_x", "bloch_y", "bloch_z"]);
    assert_eq!(rows.len(), 4);
}

fn angle_of(rows: &[Vec<String>], label: &str) -> f64 {
    rows.iter().find(|r| r[1] == label).unwrap()[3].parse().unwrap()
}

#[test]
fn compile_angles_match_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    report(&["compile", "--B", "1/13", "--angles", path.to_str().unwrap()]);
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["B", "label", "kind", "angle_deg"]);
    assert!((angle_of(&rows, "HWP3") - 26.53).abs() < 0.05);

    report(&["compile", "--B", "1/12", "--angles", path.to_str().unwrap()]);
    let (_, rows) = csv_rows(&path);
    assert!((angle_of(&rows, "HWP3") - 22.5).abs() < 0.05);
    assert!((angle_of(&rows, "HWP5") - 22.5).abs() < 0.05);
}

#[test]
fn compile_custom_povm_file() {
    let dir = tempfile::tempdir().unwrap();
    let povm = dir.path().join("custom.json");
    let sched = dir.path().join("s.json");
    // A rotated SIC: Bloch vectors of a regular tetrahedron, weights 1/2.
    let s = 1.0 / 3f64.sqrt();
    let dirs = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let elements: Vec<Value> = dirs
        .iter()
        .map(|n| {
            // Row-major entries as [re, im] pairs.
            let m = [
                [0.25 * (1.0 + n[2]), 0.0],
                [0.25 * n[0], -0.25 * n[1]],
                [0.25 * n[0], 0.25 * n[1]],
                [0.25 * (1.0 - n[2]), 0.0],
            ];
            serde_json::json!({ "matrix": m })
        })
        .collect();
    std::fs::write(&povm, serde_json::json!({ "label": "tetrahedron", "elements": elements }).to_string()).unwrap();
    let r = report(&["compile", "--povm", povm.to_str().unwrap(), "--out", sched.to_str().unwrap()]);
    assert!(r["residuals"]["round_trip"].as_f64().unwrap() <= 1e-9);
    let sim = report(&["simulate", "--schedule", sched.to_str().unwrap(), "--state", "0,0"]);
    let p = floats(&sim["outputs"]["walk"]);
    let want: Vec<f64> = dirs.iter().map(|n| 0.5 * (1.0 + n[2]) * 0.5).collect();
    for (a, b) in p.iter().zip(want) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn compile_bad_povm_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let povm = dir.path().join("bad.json");
    std::fs::write(&povm, r#"{"elements":[{"matrix":[[1,0],[0,0],[0,0],[0,0]]},{"matrix":[[0.5,0],[0,0],[0,0],[0,0]]}]}"#).unwrap();
    assert_eq!(run(&["compile", "--povm", povm.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["compile", "--povm", "/nonexistent/p.json"]).status.code(), Some(2));
}

#[test]
fn simulate_plus_state() {
    let r = report(&["simulate", "--B", "1/13", "--state", "1.5708,0", "--shots", "0"]);
    let p = floats(&r["outputs"]["walk"]);
    for (a, b) in p.iter().zip([0.1807, 0.3584, 0.2305, 0.2305]) {
        assert!((a - b).abs() < 2e-3, "{p:?}");
    }
}

#[test]
fn simulate_h_matches_born_rule() {
    let r = report(&["simulate", "--B", "1/12", "--state", "0,0"]);
    let walk = floats(&r["outputs"]["walk"]);
    let povm = report(&["povm", "--B", "1/12"]);
    for (el, p) in povm["outputs"]["povm"]["elements"].as_array().unwrap().iter().zip(walk) {
        let h = el["matrix"][0][0].as_f64().unwrap();
        assert!((h - p).abs() < 2e-3);
    }
}

#[test]
fn simulate_is_byte_deterministic() {
    let args = ["simulate", "--B", "1/14", "--shots", "1000000", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_bar_chart_csv_and_noise() {
    let dir = tempfile::tempdir().unwrap();
    let noise = dir.path().join("noise.json");
    let fig = dir.path().join("fig3.csv");
    std::fs::write(&noise, r#"{"extinction_ratio":220,"efficiency":[1,0.99,0.98,0.97],"seed":1}"#).unwrap();
    let r = report(&[
        "simulate", "--B", "1/13", "--state", "1.5708,0", "--shots", "5000", "--noise",
        noise.to_str().unwrap(), "--fig3-csv", fig.to_str().unwrap(),
    ]);
    assert!(r["inputs"]["noise"]["extinction_ratio"].as_f64().unwrap() == 220.0);
    let (header, rows) = csv_rows(&fig);
    assert_eq!(header, ["B", "outcome", "theory", "sampled", "stderr"]);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() > 0.0));
    std::fs::write(&noise, r#"{"extinction_ratio":0.5}"#).unwrap();
    assert_eq!(
        run(&["simulate", "--B", "1/13", "--noise", noise.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn simulate_bad_state() {
    assert_eq!(run(&["simulate", "--B", "1/13", "--state", "pi"]).status.code(), Some(2));
}

#[test]
fn selftest_exact_values() {
    let r = report(&["selftest", "--B", "1/15", "--shots", "0"]);
    let res = &r["outputs"]["result"];
    assert!((res["w"].as_f64().unwrap() - 8.0).abs() < 1e-3);
    assert!((res["q_bound"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    let r = report(&["selftest", "--B", "1/13", "--shots", "0"]);
    assert!((r["outputs"]["result"]["w"].as_f64().unwrap() - 7.2363).abs() < 1e-3);
    assert_eq!(r["inputs"]["witness_source"], "shipped");
}

#[test]
fn selftest_sampled_within_three_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let fig = dir.path().join("fig4.csv");
    let counts = dir.path().join("counts.csv");
    let r = report(&[
        "selftest", "--B", "1/14", "--shots", "100000", "--seed", "3", "--fig4-csv", fig.to_str().unwrap(),
        "--counts-csv", counts.to_str().unwrap(),
    ]);
    let res = &r["outputs"]["result"];
    let w = res["w"].as_f64().unwrap();
    let se = res["stderr"].as_f64().unwrap();
    assert!((w - 7.5895).abs() <= 3.0 * se, "{w} ± {se}");
    let (header, rows) = csv_rows(&fig);
    assert_eq!(header, ["B", "W", "stderr", "Q"]);
    assert_eq!(rows.len(), 1);
    let (header, rows) = csv_rows(&counts);
    assert_eq!(header, ["x", "y", "b", "count"]);
    assert_eq!(rows.len(), 40);
}

#[test]
fn selftest_threads_do_not_change_outputs() {
    let a = report(&["selftest", "--B", "1/13", "--restarts", "12", "--seed", "4"]);
    let b = report(&["selftest", "--B", "1/13", "--restarts", "12", "--seed", "4", "--threads", "4"]);
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["residuals"], b["residuals"]);
}

#[test]
fn shipped_witnesses_match_fit() {
    for d in [12, 13, 14, 15] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("data/witness/v1/b{d}.json"));
        let shipped: semisic::WitnessSpec = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let seed = shipped.fit_seed.expect("seed recorded");
        let fitted = semisic::selftest::fit_witness(1.0 / d as f64, seed).unwrap();
        assert_eq!(shipped.b.unwrap().label(), format!("1/{d}"));
        assert!((shipped.k - fitted.k).abs() < 1e-12);
        for (a, b) in shipped.omega.iter().flatten().zip(fitted.omega.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn selftest_with_witness_file_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    let r = report(&["selftest", "--B", "1/14", "--fit", "--seed", "2", "--save-witness", w.to_str().unwrap()]);
    assert_eq!(r["inputs"]["witness_source"], "fit");
    let again = report(&["selftest", "--B", "1/14", "--seed", "2", "--witness", w.to_str().unwrap()]);
    assert_eq!(again["outputs"]["result"], r["outputs"]["result"]);
    std::fs::write(&w, r#"{"omega":[[0,0,0]],"k":1}"#).unwrap();
    assert_eq!(run(&["selftest", "--B", "1/14", "--witness", w.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["selftest", "--B", "1/14", "--fit", "--witness", w.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn selftest_unshipped_b_fits_on_the_fly() {
    let r = report(&["selftest", "--B", "0.075", "--restarts", "10"]);
    let w = r["outputs"]["result"]["w"].as_f64().unwrap();
    let q = r["outputs"]["result"]["q_bound"].as_f64().unwrap();
    assert!((w - q).abs() < 1e-3);
}
