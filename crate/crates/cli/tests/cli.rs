use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qrv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn re(v: &Value) -> f64 {
    v[0].as_f64().unwrap()
}

struct Nine {
    dir: TempDir,
    povm: PathBuf,
    f: PathBuf,
}

fn nine() -> Nine {
    let dir = TempDir::new().unwrap();
    let povm = file(
        &dir,
        "povm.json",
        r#"{"space": {"atoms": ["a", "b"], "masses": [1, 1]}, "dim": 2,
            "effects": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]}"#,
    );
    let f = file(&dir, "f.json", r#"{"dim": 2, "values": {"a": [[4, 4], [4, 4]], "b": [[3, 0], [0, -3]]}}"#);
    Nine { dir, povm, f }
}

fn diag_qrv(dir: &TempDir, name: &str, diags: &[[f64; 2]]) -> PathBuf {
    let values: Vec<Value> = diags
        .iter()
        .map(|d| serde_json::json!([[d[0], 0.0], [0.0, d[1]]]))
        .collect();
    file(dir, name, &serde_json::json!({ "dim": 2, "values": values }).to_string())
}

fn uniform_space(dir: &TempDir, m: usize, mass: f64) -> PathBuf {
    let atoms: Vec<usize> = (0..m).collect();
    file(
        dir,
        "space.json",
        &serde_json::json!({ "atoms": atoms, "masses": vec![mass; m] }).to_string(),
    )
}

#[test]
fn integrate_the_nine_example() {
    let n = nine();
    let out = qrv(&["integrate", "--povm", s(&n.povm), "--f", s(&n.f)]);
    assert!(out.status.success());
    let v = json(&out);
    let m = &v["integral"];
    assert_eq!([re(&m[0][0]), re(&m[0][1]), re(&m[1][0]), re(&m[1][1])], [7.0, 4.0, 4.0, 1.0]);
    assert!((v["norm"].as_f64().unwrap() - 9.0).abs() < 1e-12);
}

#[test]
fn integrating_the_identity_gives_the_total_effect() {
    let dir = TempDir::new().unwrap();
    let povm = file(
        &dir,
        "povm.json",
        r#"{"space": {"atoms": [0, 1], "masses": [0.5, 2]}, "dim": 2,
            "effects": [[[0.25, [0, 0.25]], [[0, -0.25], 0.5]], [[0.5, 0], [0, 0.25]]]}"#,
    );
    let f = file(&dir, "f.json", r#"{"values": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]}"#);
    let rho = file(&dir, "rho.json", r#"{"rho": [[0.7, 0.1], [0.1, 0.3]]}"#);
    for extra in [vec![], vec!["--rho", s(&rho)]] {
        let mut args = vec!["integrate", "--povm", s(&povm), "--f", s(&f)];
        args.extend(extra);
        let v = json(&qrv(&args));
        let m = &v["integral"];
        assert!((re(&m[0][0]) - 0.75).abs() < 1e-12);
        assert!((m[0][1][1].as_f64().unwrap() - 0.25).abs() < 1e-12);
        assert!((re(&m[1][1]) - 0.75).abs() < 1e-12);
    }
}

#[test]
fn invalid_effect_is_a_validation_error() {
    let n = nine();
    let bad = file(
        &n.dir,
        "bad.json",
        r#"{"space": {"atoms": [0, 1], "masses": [1, 1]}, "effects": [[[1, 0], [0, -1]], [[1, 0], [0, 1]]]}"#,
    );
    let out = qrv(&["integrate", "--povm", s(&bad), "--f", s(&n.f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive semidefinite"));

    let broken = file(&n.dir, "broken.json", "{\"values\": [[[1]],\n [[2]],]}");
    let out = qrv(&["integrate", "--povm", s(&n.povm), "--f", s(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = qrv(&["norm1", "--povm", s(&n.povm), "--f", s(&n.f), "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rn_defaults_to_the_maximally_mixed_state() {
    let n = nine();
    let v = json(&qrv(&["rn", "--povm", s(&n.povm)]));
    assert_eq!(v["induced"], serde_json::json!([1.0, 1.0]));
    assert!((v["sup_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bracket_with_the_constant_one_is_the_integral() {
    let n = nine();
    let g = file(&n.dir, "g.json", r#"{"values": {"a": 1, "b": 1}}"#);
    let v = json(&qrv(&["bracket", "--povm", s(&n.povm), "--f", s(&n.f), "--g", s(&g)]));
    assert!((v["norm"].as_f64().unwrap() - 9.0).abs() < 1e-12);
}

#[test]
fn norm1_certificate_round_trip() {
    let n = nine();
    let cert = n.dir.path().join("cert.json");
    let out = qrv(&["norm1", "--povm", s(&n.povm), "--f", s(&n.f), "--certificate", s(&cert)]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 9.0).abs() < 1e-6);

    let out = qrv(&["verify", "--certificate", s(&cert)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["valid"], Value::Bool(true));

    // Shrinking the claimed value breaks the recomputation check.
    let mut file: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    file["certificate"]["value"] = serde_json::json!(8.5);
    fs::write(&cert, file.to_string()).unwrap();
    let out = qrv(&["verify", "--certificate", s(&cert)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["valid"], Value::Bool(false));
}

#[test]
fn majorize_joe_verducci() {
    let dir = TempDir::new().unwrap();
    let f = diag_qrv(&dir, "f.json", &[[1.0, 4.0], [3.0, 2.0]]);
    let g = diag_qrv(&dir, "g.json", &[[1.0, 2.0], [3.0, 4.0]]);
    let space = uniform_space(&dir, 2, 0.5);
    let verdict = |order: &str| {
        let cert = dir.path().join(format!("{order}.json"));
        let args = [
            "majorize", "--f", s(&f), "--g", s(&g), "--space", s(&space), "--order", order, "--samples", "2000",
            "--certificate", s(&cert),
        ];
        let v = json(&qrv(&args));
        let verified = qrv(&["verify", "--certificate", s(&cert)]);
        assert!(verified.status.success(), "order {order} certificate did not verify");
        v
    };
    assert_eq!(verdict("s")["verdict"], "holds");
    let t = verdict("t");
    assert_eq!(t["verdict"], "fails");
    assert!(t["witness"]["margin"].as_f64().unwrap() >= 0.9);
    assert_eq!(verdict("b")["verdict"], "fails");
}

#[test]
fn malamud_is_separated() {
    let dir = TempDir::new().unwrap();
    let f = diag_qrv(&dir, "f.json", &[[12.0, 12.0], [12.0, 12.0], [5.0, 3.0], [3.0, 5.0]]);
    let g = diag_qrv(&dir, "g.json", &[[8.0, 16.0], [16.0, 8.0], [0.0, 0.0], [8.0, 8.0]]);
    let space = uniform_space(&dir, 4, 0.25);
    let b = json(&qrv(&["majorize", "--f", s(&f), "--g", s(&g), "--space", s(&space)]));
    assert_eq!(b["verdict"], "fails");
    assert_eq!(b["witness"]["kind"], "farkas");

    let cert = dir.path().join("sep.json");
    let v = json(&qrv(&[
        "separate", "--f", s(&f), "--g", s(&g), "--space", s(&space), "--certificate", s(&cert),
    ]));
    assert_eq!(v["outcome"], "separated");
    assert!(v["margin"].as_f64().unwrap() >= 1e-6);
    assert!(qrv(&["verify", "--certificate", s(&cert)]).status.success());

    // g is trivially majorized by itself: no separating functional.
    let v = json(&qrv(&["separate", "--f", s(&g), "--g", s(&g), "--space", s(&space)]));
    assert_eq!(v["outcome"], "majorized");
    assert_eq!(v["consistent"], Value::Bool(true));
}

#[test]
fn paper_examples_pass_and_list() {
    let v = json(&qrv(&["paper-examples", "--list"]));
    assert!(v.as_array().unwrap().iter().any(|id| id == "malamud"));

    let out = qrv(&["paper-examples", "--id", "nine-vs-eleven", "--id", "triangle-counterexample"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["pass"], Value::Bool(true));

    assert_eq!(qrv(&["paper-examples", "--id", "no-such-example"]).status.code(), Some(2));
}

#[test]
fn property_suite_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let status = qrv(&["property-suite", "--seed", "7", "--trials", "40", "--section", "birkhoff", "-o", s(out)]);
        assert!(status.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let empty = json(&qrv(&["property-suite", "--trials", "0"]));
    assert_eq!(empty["total_checked"], 0);
    assert_eq!(qrv(&["property-suite", "--section", "nope"]).status.code(), Some(2));
}
