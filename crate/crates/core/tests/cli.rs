//! The command-line tool: exit codes and the fit/predict round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gbrff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbrff"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/specs").join(format!("{name}.toml"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_passes() {
    let out = gbrff(&["check"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).matches("PASS").count(), 5);
}

#[test]
fn fit_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let preds = dir.path().join("preds.csv");
    let wine = spec("wine");
    for method in ["gbrff", "gbrff_random", "pbrff"] {
        let out = gbrff(&[
            "fit", "--spec", wine.to_str().unwrap(), "--method", method, "--rounds", "5", "--landmarks", "5",
            "--k-features", "10", "--model-out", model.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let trained = stdout(&out);
        let out = gbrff(&[
            "predict", "--model-in", model.to_str().unwrap(), "--spec", wine.to_str().unwrap(), "--out",
            preds.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        // the same rows give the same accuracy as at training time
        let acc = |s: &str| s.split('%').next().unwrap().rsplit(' ').next().unwrap().to_string();
        assert_eq!(acc(&trained), acc(&stdout(&out)));
        let text = std::fs::read_to_string(&preds).unwrap();
        assert_eq!(text.lines().count(), 179);
    }
}

#[test]
fn small_bench_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = gbrff(&[
        "bench", "--spec", spec("wine").to_str().unwrap(), "--method", "gbrff,pbrff", "--rounds", "3",
        "--landmarks", "3", "--k-features", "5", "--fast", "--workers", "1", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 5);
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn failures_exit_with_one() {
    assert_eq!(gbrff(&["predict", "--model-in", "/nonexistent.json", "--spec", "x.toml"]).status.code(), Some(1));
    assert_eq!(gbrff(&["fit", "--spec", spec("wine").to_str().unwrap(), "--rounds", "0", "--model-out", "/tmp/x"]).status.code(), Some(1));
    assert_eq!(gbrff(&["bench", "--method", "xgb"]).status.code(), Some(1));
    assert_eq!(gbrff(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gbrff(&["--help"]).status.code(), Some(0));
}
