use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"{
  "dataset": { "kind": "translation_family", "n_modes": 3, "n_classes": 2, "dim": 2,
               "n_per_mode": 40, "step": 1.0, "noise_std": 0.5 },
  "methods": [ { "method": "otda" } ],
  "seeds": [0, 1, 2],
  "classifier": { "hidden": [4], "train": { "epochs": 5 } }
}"#;

fn bench() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bench"));
    c.env_remove("BENCH_OUT_DIR");
    c
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let st = bench()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seeds", "4,5", "--jobs", "2"])
        .status()
        .unwrap();
    assert!(st.success());
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(report["seeds"], serde_json::json!([4, 5]));
    assert!(out.join("timing.json").exists() && out.join("delta.csv").exists());

    let again = dir.path().join("again");
    let st = bench().args(["report", "--format", "csv", "--in"]).arg(&out).arg("--out").arg(&again).status().unwrap();
    assert!(st.success());
    assert_eq!(read(&again.join("accuracy.csv")), read(&out.join("accuracy.csv")));
}

#[test]
fn multi_protocol_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let env_out = dir.path().join("from-env");
    let st = bench()
        .env("BENCH_OUT_DIR", &env_out)
        .args(["run", "--protocol", "multi", "--seeds", "0", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(read(&env_out.join("report.json")).contains("\"multi_source\""));
    assert!(!env_out.join("delta.csv").exists());
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{ "dataset": { "kind": "nope" } }"#).unwrap();
    let out = bench().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
