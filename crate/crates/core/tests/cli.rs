use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dequant"))
}

#[test]
fn gen_solve_calibrate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.json");
    let inst = dir.path().join("inst.json");
    fs::write(&gen, r#"{"N": 30, "M": 24, "S": 3, "B": 4, "G": 0.5, "R": 4}"#).unwrap();
    let status = bin().args(["gen", "--seed", "4", "--config"]).arg(&gen).arg("--out").arg(&inst).status().unwrap();
    assert!(status.success());

    let out = bin().args(["solve", "--model", "L2", "--config"]).arg(&inst).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["x_hat"].as_array().unwrap().len(), 30);

    let out = bin()
        .args(["calibrate", "--method", "empirical", "--samples", "2000", "--config"])
        .arg(&inst)
        .output()
        .unwrap();
    assert!(out.status.success());
    let cal: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cal["method"], "empirical");
    assert!(cal["epsilon"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"swept": {"name": "S", "values": [1, 3]}, "fixed": {"N": 40, "M": 30, "B": 4, "G": 0.5, "R": 4},
            "models": ["LassoInf", "Dantzig"], "trials": 3, "master_seed": 12}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}.csv"));
        let status = bin().args(["sweep", "--threads", threads, "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outputs.push((fs::read(&out).unwrap(), fs::read(dir.path().join(format!("out{threads}_agg.csv"))).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"swept": {"name": "S", "values": [1]}, "fixed": {"S": 2}}"#).unwrap();
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["solve", "--config", "/nonexistent/instance.json"]).output().unwrap();
    assert!(!out.status.success());
}
