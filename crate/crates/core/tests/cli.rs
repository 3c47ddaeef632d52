mod common;

use std::path::Path;
use std::process::Command;

fn masa(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_masa"))
        .args(args)
        .env("MASA_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&common::tiny_config()).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_train_backtest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    let masa_core::harness::DataSource::Synth(spec) = common::tiny_config().data else {
        unreachable!()
    };
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let csv = dir.path().join("prices.csv");
    let out = masa(&["synth", "--spec", spec_path.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = write_config(dir.path());
    let train_dir = dir.path().join("train");
    let out = masa(&["train", "--config", &cfg, "--out", train_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(train_dir.join("training.json").exists());

    let bt = dir.path().join("bt");
    let out = masa(&[
        "backtest",
        "--checkpoint",
        train_dir.join("checkpoint.json").to_str().unwrap(),
        "--data",
        csv.to_str().unwrap(),
        "--out",
        bt.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut wide = common::two_regime_spec();
    wide.regimes.truncate(2);
    std::fs::write(&spec_path, serde_json::to_string(&wide).unwrap()).unwrap();
    let wide_csv = dir.path().join("wide.csv");
    assert!(masa(&["synth", "--spec", spec_path.to_str().unwrap(), "--out", wide_csv.to_str().unwrap()]).status.success());
    let mismatch = masa(&[
        "backtest",
        "--checkpoint",
        train_dir.join("checkpoint.json").to_str().unwrap(),
        "--data",
        wide_csv.to_str().unwrap(),
        "--out",
        bt.to_str().unwrap(),
    ]);
    assert!(!mismatch.status.success());

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(bt.join("backtest.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("sharpe"));
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"max_episode": 0}"#).unwrap();
    let out = masa(&["compare", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let mut cfg = common::tiny_config();
    cfg.data = masa_core::harness::DataSource::File {
        path: dir.path().join("missing.csv"),
        format: Default::default(),
    };
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = masa(&["compare", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_writes_all_report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = masa(&["compare", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "report.csv", "plotdata.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}
