use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use protocoling::cli::{EXIT_OK, EXIT_VALIDATION, MANIFEST_JSON};
use protocoling::evalkit::{read_threshold_sweep, ACCURACY_CSV, DELTA_CSV, PERCENTILE_CSV, REPORT_JSON, SWEEP_CSV};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protocoling")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_eval_econ_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--spec", "demo", "--out", s(&data), "--seed", "11"]);
    for f in ["orders.csv", "train.csv", "test.csv", "hierarchy.csv", MANIFEST_JSON] {
        assert!(data.join(f).is_file(), "{f} missing");
    }

    let a = dir.path().join("a.prtm");
    let b = dir.path().join("b.prtm");
    for model in [&a, &b] {
        ok(&["train", "--data", s(&data), "--out", s(model), "--seed", "5", "--epochs", "8"]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.prtm.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "train");
    assert_eq!(manifest["seed"], 5);
    let digest = protocoling::cli::file_digest(&a).unwrap();
    assert!(manifest["outputs"].as_object().unwrap().values().any(|v| v == &digest));

    let report = dir.path().join("report");
    ok(&["eval", "--model", s(&a), "--data", s(&data), "--out", s(&report)]);
    for f in [ACCURACY_CSV, PERCENTILE_CSV, DELTA_CSV, SWEEP_CSV, REPORT_JSON] {
        assert!(report.join(f).is_file(), "{f} missing");
    }
    let sweep = read_threshold_sweep(report.join(SWEEP_CSV)).unwrap();
    assert!(sweep.windows(2).all(|w| w[0].ap_fraction >= w[1].ap_fraction));

    let sweep_dir = dir.path().join("sweep");
    let printed = ok(&["sweep", "--model", s(&a), "--data", s(&data), "--out", s(&sweep_dir), "--threshold", "0.1"]);
    assert!(!printed.is_empty());
    assert!(sweep_dir.join(SWEEP_CSV).is_file());

    let econ = dir.path().join("econ");
    ok(&["econ", "--data", s(&report), "--out", s(&econ)]);
    let csv = fs::read_to_string(econ.join("economics.csv")).unwrap();
    assert!(csv.starts_with("threshold,ap_fraction,savings_usd,fte\n"));
    assert_eq!(csv.lines().count(), sweep.len() + 1);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x"), dir.path().join("y"));
    ok(&["synth", "--out", s(&x), "--seed", "3"]);
    ok(&["synth", "--out", s(&y), "--seed", "3"]);
    for f in ["orders.csv", "train.csv", "test.csv"] {
        assert_eq!(fs::read(x.join(f)).unwrap(), fs::read(y.join(f)).unwrap(), "{f}");
    }
    // manifests name different paths but carry the same digests
    let digests = |d: &Path| -> Vec<serde_json::Value> {
        let m: serde_json::Value = serde_json::from_slice(&fs::read(d.join(MANIFEST_JSON)).unwrap()).unwrap();
        m["outputs"].as_object().unwrap().values().cloned().collect()
    };
    assert_eq!(digests(&x), digests(&y));
}

#[test]
fn econ_presets() {
    let tech = ok(&["econ", "--role", "technologist", "--ap-fraction", "1.0"]);
    assert!(tech.contains("73466.67"), "{tech}");
    let rad = ok(&["econ", "--role", "radiologist", "--ap-fraction", "1"]);
    assert!(rad.contains("199133.33"), "{rad}");
}

#[test]
fn gradcheck_passes() {
    ok(&["gradcheck", "--seed", "2"]);
}

#[test]
fn bad_invocations_exit_with_validation_code() {
    let missing = tempfile::tempdir().unwrap().path().join("nope.csv");
    for args in [
        vec!["frobnicate"],
        vec!["econ", "--ap-fraction", "1.5"],
        vec!["econ", "--role", "nurse", "--ap-fraction", "0.5"],
        vec!["train", "--data", s(&missing), "--out", "/tmp/never.prtm"],
        vec!["synth", "--out", "/tmp/never", "--train-fraction", "1.0"],
    ] {
        let out = bin(&args);
        assert_eq!(out.status.code(), Some(EXIT_VALIDATION), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn corrupt_model_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--out", s(&data)]);
    let model = dir.path().join("m.prtm");
    ok(&["train", "--data", s(&data), "--out", s(&model), "--epochs", "1"]);
    let mut bytes = fs::read(&model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    fs::write(&model, bytes).unwrap();

    let eval = bin(&["eval", "--model", s(&model), "--data", s(&data), "--out", s(&dir.path().join("r"))]);
    assert_ne!(eval.status.code(), Some(EXIT_OK));
    let serve = bin(&["serve", "--model", s(&model), "--hierarchy", s(&data.join("hierarchy.csv")), "--bind", "127.0.0.1:0"]);
    assert_ne!(serve.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&serve.stderr).contains("checksum"));
}
