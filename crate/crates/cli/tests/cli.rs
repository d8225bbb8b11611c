//! End-to-end runs of the `coadj` binary.

use serde_json::Value;
use std::process::{Command, Output};

fn coadj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coadj")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn nabla3_monodromy_for_half_integer_omega() {
    let out = coadj(&["monodromy", "--operator", "nabla3", "--constant-D", "0.125", "--q", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    // Resolved config leads the document.
    assert_eq!(v.as_object().unwrap().keys().next().unwrap(), "config");
    assert_eq!(v["config"]["command"]["operator"], "nabla3");
    assert_eq!(v["omega"], 0.5);
    let m = &v["monodromy"]["matrix"];
    // ω = 1/2: cos 2πω = −1, sin 2πω = 0, (1 − cos)/ω² = 8.
    let want = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [8.0, 0.0, -1.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((m[i][j].as_f64().unwrap() - want[i][j]).abs() < 1e-7, "entry ({i},{j})");
        }
    }
    assert!((v["det"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn dxn_chain_shape() {
    let out = coadj(&["constraints", "--case", "dxn"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["report"];
    let prov: Vec<&str> = r["constraints"].as_array().unwrap().iter().map(|c| c["provenance"].as_str().unwrap()).collect();
    assert_eq!(prov, ["primary", "secondary", "secondary", "secondary"]);
    assert_eq!(r["multiplier_conditions"].as_array().unwrap().len(), 1);
    assert_eq!(r["terminated"], true);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let args = ["check-all", "--criteria", "1,3,5", "--seed", "7"];
    let a = coadj(&args);
    let b = coadj(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["config"]["global"]["seed"], 7);
    assert_eq!(v["summary"].as_array().unwrap().len(), 3);
}

#[test]
fn check_all_needs_opt_in_for_documented_failures() {
    let strict = coadj(&["check-all", "--format", "text", "--jobs", "4"]);
    assert_eq!(strict.status.code(), Some(1));
    let table = String::from_utf8(strict.stdout).unwrap();
    assert!(table.starts_with("# config: "));
    assert_eq!(table.lines().filter(|l| l.starts_with("criterion ")).count(), 14);
    assert!(!table.lines().any(|l| l.ends_with(" FAIL") || l.contains(" FAIL:")));
    let lenient = coadj(&["check-all", "--format", "text", "--jobs", "4", "--allow-documented"]);
    assert_eq!(lenient.status.code(), Some(0));
}

#[test]
fn failing_checks_exit_one() {
    let out = coadj(&["verify", "--case", "chiral-q0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("closed-form residual"));
    assert_eq!(coadj(&["verify", "--case", "dxn"]).status.code(), Some(0));
    // This start escapes to Q = ∞ in finite time.
    let esc = coadj(&["reduce", "--q0", "3", "--p0", "0.1"]);
    assert_eq!(esc.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(coadj(&["check-all", "--criteria", "15"]).status.code(), Some(2));
    assert_eq!(coadj(&["constraints", "--case", "nope"]).status.code(), Some(2));
    assert_eq!(coadj(&["monodromy"]).status.code(), Some(2));
    assert_eq!(coadj(&["transverse", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(coadj(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn reduce_csv_has_header_and_series() {
    let out = coadj(&["reduce", "--format", "csv", "--t-end", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    let mut lines = s.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(lines.next().unwrap(), "t,Q,P,H");
    assert!(lines.count() >= 10);
}

#[test]
fn transverse_emits_fixed_point_momentum() {
    let out = coadj(&["transverse", "--theory", "full", "--emit", "momentum"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!json(&out)["momentum"].as_array().unwrap().is_empty());
}

#[test]
fn field_input_round_trip() {
    let dir = std::env::temp_dir().join(format!("coadj-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("d.json");
    let field = coadj_core::circlefield::CircleField::constant(0.125, 4);
    std::fs::write(&path, serde_json::to_string(&field).unwrap()).unwrap();
    let out = coadj(&["monodromy", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = &json(&out)["monodromy"]["matrix"];
    assert!((m[2][0].as_f64().unwrap() - 8.0).abs() < 1e-7);
    let out_path = dir.join("o.json");
    let o = coadj(&["orbit", "--constant-D", "0.125", "--out", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["orbit"]["omega"], 0.5);
    std::fs::remove_dir_all(&dir).unwrap();
}
