use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydberg-ghz"))
}

const SMALL: &str = r#"experiment = "custom"

[parameters]
T_inv_gamma = 50.0
model = "effective"
error_kind = "global"
epsilon = 0.0
steps_per_stage = 400
outputs_per_stage = 10

[sweep]
lambda = [0.0, 2.0]
epsilon = [-0.1, 0.1]
"#;

#[test]
fn list_names_every_experiment() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.contains("table1-ghz-scaling"));
    assert!(text.contains("Table I"));
}

#[test]
fn list_show_prints_parsable_default() {
    let out = bin().args(["list", "--show", "fig6-distance-fluctuation"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = rydberg_ghz::experiment::ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg.sweep.grid().len(), 15);
}

#[test]
fn run_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let st = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .args(["--threads", threads, "--format", "csv,json"])
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(out_dir);
    }
    for f in ["custom.csv", "runs/run_000.csv", "runs/run_003.csv"] {
        assert_eq!(fs::read(outputs[0].join(f)).unwrap(), fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outputs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 4);
    assert!(outputs[0].join("custom.json").exists());
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"custom\"\n[parameters]\nV_MHz = 1.0\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("V_MHz"));
    let missing = bin().args(["run", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_and_names_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.toml");
    fs::write(
        &cfg,
        "experiment = \"custom\"\n[parameters]\nmodel = \"effective\"\nintegrator = \"adaptive\"\ntolerance = 1e-3\nkappa_over_V = 1e300\n[sweep]\nlambda = [1.0]\n",
    )
    .unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda=1"));
}

#[test]
fn verify_default_passes_and_corruption_fails() {
    let ok = bin().args(["verify", "--experiment", "fig3-populations"]).output().unwrap();
    assert!(ok.status.success());
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("corrupt.toml");
    fs::write(&cfg, "experiment = \"fig3-populations\"\n[parameters]\ncorrupt_omega_factor = 1.1\n").unwrap();
    let bad = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["passed"], false);
}
