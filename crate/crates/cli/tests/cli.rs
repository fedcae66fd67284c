use std::path::Path;
use std::process::{Command, Output};

fn qoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qoe"))
        .args(args)
        .env_remove("QOE_THREADS")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) -> String {
    let data = dir.join("data");
    ok(qoe(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--set",
        "synth.n_contents=4",
        "--set",
        "synth.n_patterns=3",
        "--set",
        "synth.frames_min=40",
        "--set",
        "synth.frames_max=50",
    ]));
    data.join("manifest.json").to_str().unwrap().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn evaluate_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        ok(qoe(&[
            "evaluate",
            "--manifest",
            &manifest,
            "--metric",
            "ssim",
            "--regressor",
            "et",
            "--set",
            r#"grid=[{"kind":"et","trees":30,"max_features":"all","min_leaf":1,"max_depth":null,"bootstrap":false}]"#,
            "--trials",
            "15",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]));
        read_dir_sorted(&out)
    };
    let one = run("1");
    assert_eq!(one.len(), 3);
    assert_eq!(one, run("3"));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_qoe"))
        .args(["features", "--manifest", &manifest, "--out", dir.path().join("o").to_str().unwrap()])
        .env("QOE_THREADS", "2")
        .output()
        .unwrap();
    ok(out);
    let bad = Command::new(env!("CARGO_BIN_EXE_qoe"))
        .args(["features", "--manifest", &manifest])
        .env("QOE_THREADS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("QOE_THREADS"));
}

#[test]
fn unknown_regressor_is_a_usage_error() {
    let out = qoe(&["evaluate", "--regressor", "xgboost"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("xgboost"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"pooling.methd": "vq"}"#).unwrap();
    let out = qoe(&["features", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("methd"));
}

#[test]
fn features_rerun_and_missing_video() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("o");
    let args = ["features", "--manifest", &manifest, "--metric", "gmsd", "--pooling", "vq", "--out", out.to_str().unwrap()];
    let printed = ok(qoe(&args));
    assert!(printed.trim().ends_with("features.csv"));
    let first = std::fs::read(out.join("features.csv")).unwrap();
    ok(qoe(&args));
    assert_eq!(first, std::fs::read(out.join("features.csv")).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 13);

    std::fs::remove_file(dir.path().join("data/ref_c02.yuv")).unwrap();
    let failed = qoe(&args);
    assert!(!failed.status.success());
    let err = String::from_utf8_lossy(&failed.stderr);
    assert!(err.contains("session c02/p00"), "{err}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("o");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "manifest": manifest,
            "out": out,
            "regressor": "lasso",
            "experiment": "2",
            "features": "vqa,m,i",
            "pooling.method": "hysteresis",
            "pooling.hysteresis.tau_s": 1.0
        })
        .to_string(),
    )
    .unwrap();
    ok(qoe(&["evaluate", "--config", cfg.to_str().unwrap(), "--regressor", "ridge"]));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("exp2_report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["regressor"], "ridge");
    assert_eq!(report["config"]["pooling"], "hysteresis");
    assert_eq!(report["config"]["features"], "vqa,m,i");
    assert_eq!(report["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn train_predict_and_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    ok(qoe(&[
        "train",
        "--manifest",
        &manifest,
        "--regressor",
        "rf",
        "--set",
        r#"grid=[{"kind":"rf","trees":1,"max_features":"all","min_leaf":1,"max_depth":null,"bootstrap":false}]"#,
        "--out",
        out_s,
    ]));
    let model = out.join("model.json");
    let predict = |model: &Path, extra: &[&str]| {
        let mut args = vec!["predict", "--manifest", &manifest, "--model", model.to_str().unwrap(), "--out", out_s];
        args.extend_from_slice(extra);
        qoe(&args)
    };
    ok(predict(&model, &[]));
    let csv = std::fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 1e-9, "{line}");
    }

    // re-serialized model predicts identically
    let copy = dir.path().join("copy.json");
    let parsed: serde_json::Value = serde_json::from_slice(&std::fs::read(&model).unwrap()).unwrap();
    std::fs::write(&copy, serde_json::to_string(&parsed).unwrap()).unwrap();
    ok(predict(&copy, &[]));
    assert_eq!(csv, std::fs::read_to_string(out.join("predictions.csv")).unwrap());

    let mismatch = predict(&model, &["--features", "vqa,r1"]);
    assert!(!mismatch.status.success());

    let mut stale = parsed.clone();
    stale["format_version"] = 2.into();
    std::fs::write(&copy, stale.to_string()).unwrap();
    let rejected = predict(&copy, &[]);
    assert!(!rejected.status.success());
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("version"));
}

#[test]
fn significance_and_sweep_commands() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("o");
    let printed = ok(qoe(&[
        "significance",
        "--manifest",
        &manifest,
        "--compare",
        "ridge,br,vsqm",
        "--trials",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(printed.lines().count(), 2);
    let csv = std::fs::read_to_string(out.join("significance.csv")).unwrap();
    assert!(csv.starts_with("method,ridge,br,vsqm\n"));

    ok(qoe(&[
        "sweep",
        "--manifest",
        &manifest,
        "--regressor",
        "ridge",
        "--fractions",
        "0.5,0.75",
        "--trials",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(out.join("sweep.dat").exists());
}
