use std::process::{Command, Output};

use serde_json::Value;

fn sbmeter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmeter")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn complexity_of_square_is_four_fifths() {
    let v = json(&sbmeter(&["complexity1d", "poly", "0,0,1"]));
    assert!((v["complexity"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["order"], 2);
}

#[test]
fn complexity_of_sine_numeric() {
    let v = json(&sbmeter(&[
        "complexity1d",
        "sin",
        "1",
        "--domain",
        "0,3.141592653589793",
        "--numeric",
    ]));
    assert!(v["truncated"].as_bool().unwrap());
    assert!(v["complexity"].as_f64().unwrap() > 0.0);
}

#[test]
fn taylor_first_order() {
    let v = json(&sbmeter(&["taylor", "--magnitudes", "0,3", "--eps", "0.1"]));
    assert!((v["bound"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn decompose_writes_band_tensors() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("x.ppm");
    let mut bytes = b"P6\n4 4\n255\n".to_vec();
    bytes.extend((0..48).map(|i| (i * 37 % 256) as u8));
    std::fs::write(&img, bytes).unwrap();
    let v = json(&sbmeter(&[
        "decompose",
        "--input",
        img.to_str().unwrap(),
        "--bands",
        "0.5",
    ]));
    assert!(v["reconstruction_max_abs_error"].as_f64().unwrap() < 1e-12);
    assert!(dir.path().join("x_low.sbt").exists());
    assert!(dir.path().join("x_high.sbt").exists());
}

#[test]
fn measure_on_synthetic_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"synthetic": {"classes": 2, "per_class": 3, "shape": [1, 8, 8]},
            "model": {"kind": "linear", "embed_dim": 3}, "runs": 1}"#,
    )
    .unwrap();
    let v = json(&sbmeter(&[
        "measure",
        "--config",
        cfg.to_str().unwrap(),
        "--pairs",
        "4",
        "--steps",
        "3",
    ]));
    assert_eq!(v["config"]["pairs"], 4);
    assert_eq!(v["per_run"][0]["pairs"], 4);
    assert!(v["mean"]["S"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_rejects_inapplicable_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"synthetic": {"classes": 2, "per_class": 2, "shape": [1, 8, 8]},
            "model": {"kind": "linear"}, "pairs": 2, "runs": 1}"#,
    )
    .unwrap();
    let out = sbmeter(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--parameter",
        "beta",
        "--values",
        "0.9",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("available sites"));
}

#[test]
fn ingest_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.sbp");
    std::fs::write(&f, b"SBPX\x00\x00\x00\x00").unwrap();
    let out = sbmeter(&["ingest", f.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}
