use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subnetpc"))
        .args(args)
        .output()
        .expect("spawn subnetpc")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn gen(dir: &Path, split: &str, count: &str) {
    ok(&[
        "gen",
        "--n-subnetworks",
        "4",
        "--count",
        count,
        "--split",
        split,
        "--seed",
        "9",
        "--out",
        dir.to_str().unwrap(),
    ]);
}

#[test]
fn gen_is_reproducible() {
    let tmp = tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "train", "12");
    gen(&b, "train", "12");
    for file in ["manifest.json", "snapshots.csv"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn gen_refuses_to_overwrite() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("d");
    gen(&dir, "train", "3");
    let before = std::fs::read(dir.join("snapshots.csv")).unwrap();
    let out = run(&["gen", "--count", "5", "--out", dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(std::fs::read(dir.join("snapshots.csv")).unwrap(), before);
    ok(&[
        "gen",
        "--count",
        "5",
        "--n-subnetworks",
        "4",
        "--out",
        dir.to_str().unwrap(),
        "--force",
    ]);
    assert_ne!(std::fs::read(dir.join("snapshots.csv")).unwrap(), before);
}

#[test]
fn train_eval_round_trip() {
    let tmp = tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    gen(&tmp.path().join("train"), "train", "32");
    gen(&tmp.path().join("test"), "test", "16");
    for v in ["hD", "dD", "hH"] {
        ok(&[
            "train",
            "--data",
            &p("train"),
            "--variant",
            v,
            "--epochs",
            "2",
            "--batch-size",
            "8",
            "--out",
            &p(&format!("{v}.json")),
        ]);
    }
    ok(&[
        "eval",
        "--data",
        &p("test"),
        "--model",
        &p("hD.json"),
        "--model",
        &p("dD.json"),
        "--model",
        &p("hH.json"),
        "--out",
        &p("results"),
    ]);
    let records = std::fs::read_to_string(tmp.path().join("results/records.csv")).unwrap();
    // header plus 16 rows for each of five policies
    assert_eq!(records.lines().count(), 1 + 5 * 16);
    for policy in ["max_power", "wmmse", "pcgnn-hD", "pcgnn-dD", "pcgnn-hH"] {
        assert!(records.contains(policy), "{policy}");
    }
    for file in ["cdf_se.csv", "cdf_power.csv", "gains.csv"] {
        assert!(tmp.path().join("results").join(file).exists(), "{file}");
    }
    let gains = std::fs::read_to_string(tmp.path().join("results/gains.csv")).unwrap();
    assert_eq!(gains.lines().count(), 1 + 5 * 5);
    assert!(gains.lines().any(|l| l == "max_power,max_power,0.0"));
    let loss = std::fs::read_to_string(tmp.path().join("hD.loss.csv")).unwrap();
    assert_eq!(loss.lines().collect::<Vec<_>>()[0], "epoch,loss");
    assert_eq!(loss.lines().count(), 3);

    // a model trained on another scenario is evaluated with a warning
    ok(&[
        "gen",
        "--n-subnetworks",
        "4",
        "--shadowing-std",
        "3",
        "--count",
        "4",
        "--split",
        "test",
        "--out",
        &p("other"),
    ]);
    let out = run(&[
        "eval",
        "--data",
        &p("other"),
        "--model",
        &p("hD.json"),
        "--no-wmmse",
        "--out",
        &p("r2"),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("different scenario"));
    // a test split is not accepted as training data
    let out = run(&["train", "--data", &p("test"), "--epochs", "1", "--out", &p("bad.json")]);
    assert!(!out.status.success());
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let tmp = tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    gen(&tmp.path().join("train"), "train", "24");
    let (data, ckpt) = (p("train"), p("ckpt.json"));
    let (full, half, resumed) = (p("full.json"), p("half.json"), p("resumed.json"));
    let common = ["--data", data.as_str(), "--batch-size", "8", "--train-seed", "3"];
    let with = |extra: &[&str]| {
        let mut args = vec!["train"];
        args.extend(extra);
        args.extend(common);
        ok(&args);
    };
    with(&["--epochs", "4", "--out", &full]);
    with(&[
        "--epochs",
        "2",
        "--out",
        &half,
        "--checkpoint",
        &ckpt,
        "--checkpoint-every",
        "1",
    ]);
    with(&["--epochs", "4", "--out", &resumed, "--checkpoint", &ckpt, "--resume"]);
    let params = |f: &str| -> serde_json::Value {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(f)).unwrap()).unwrap();
        v["params"].clone()
    };
    assert_eq!(params("full.json"), params("resumed.json"));
}

#[test]
fn invalid_inputs_exit_nonzero() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = out.to_str().unwrap();
    assert!(!run(&["gen", "--n-subnetworks", "0", "--out", o]).status.success());
    assert!(!run(&["gen", "--shadowing-std", "-1", "--out", o]).status.success());
    assert!(!run(&["oracle", "--n-subnetworks", "5"]).status.success());
    assert!(!run(&[
        "eval",
        "--data",
        tmp.path().join("missing").to_str().unwrap(),
        "--out",
        o
    ])
    .status
    .success());
    assert!(!run(&["train", "--data", o, "--variant", "xy", "--out", o])
        .status
        .success());
}

#[test]
fn oracle_and_gradcheck_pass() {
    let out = ok(&["oracle", "--count", "5", "--grid-points", "201"]);
    assert!(out.contains("median"));
    let out = ok(&["gradcheck"]);
    assert_eq!(out.lines().filter(|l| l.ends_with("ok")).count(), 9);
}
