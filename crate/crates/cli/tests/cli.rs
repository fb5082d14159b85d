use std::path::Path;
use std::process::{Command, Output};

fn toruscover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toruscover")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_report_xi() {
    let dir = tempfile::tempdir().unwrap();
    let out = toruscover(&["constants", "--tolerance", "1e-12", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&dir.path().join("report.json"));
    let xi = report["xi"]["value"].as_f64().unwrap();
    assert!((xi - 1.79556).abs() < 5e-6);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "constants");
    assert_eq!(manifest["outputs"][0], "report.json");
}

#[test]
fn small_torus_is_rejected_with_the_packing_condition() {
    let dir = tempfile::tempdir().unwrap();
    let out = toruscover(&["cover", "--torus_side", "1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("packing torus of K - K"), "{msg}");
    assert_eq!(msg.trim().lines().count(), 1);
}

#[test]
fn config_errors_exit_one_naming_the_key() {
    for (args, key) in [
        (vec!["scan", "--radious", "2"], "radious"),
        (vec!["scan", "--trials", "many"], "trials"),
        (vec!["scan", "--intensities", "[]"], "intensity grid is empty"),
        (vec!["scan", "--body", "cube", "--radius", "1"], "radius"),
        (vec!["scan", "--body", "torus"], "body"),
        (vec!["scan", "--trials"], "trials"),
    ] {
        let out = toruscover(&args);
        assert_eq!(code(&out), 1, "{args:?}");
        let msg = stderr(&out);
        assert!(msg.contains(key), "{args:?}: {msg}");
        assert_eq!(msg.trim().lines().count(), 1, "{msg}");
    }
    let out = toruscover(&["frobnicate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_files_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "dim = 3\nbody = \"cube\"\nside = 1.0\ntorus_side = 3.0\nintensity = 2.0\ntrials = 5\nmaster_seed = 9\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    let out = toruscover(&["sample", "--config", cfg.to_str().unwrap(), "--trial", "3", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = read_json(&run.join("manifest.json"));
    assert_eq!(manifest["config"]["dim"], 3);
    assert_eq!(manifest["config"]["trial"], 3);
    assert_eq!(manifest["config"]["torus_sides"], serde_json::json!([3.0, 3.0, 3.0]));
    let points = std::fs::read_to_string(run.join("points.csv")).unwrap();
    assert!(points.starts_with("schema,index,x0,x1,x2\n"));

    std::fs::write(&cfg, "dimension = 3\n").unwrap();
    let out = toruscover(&["sample", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`dimension`"));
}

#[test]
fn manifest_subcommand_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("a");
    assert_eq!(code(&toruscover(&["sample", "--out", run.to_str().unwrap()])), 0);
    let manifest = run.join("manifest.json");
    let out = toruscover(&["cover", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("manifest records subcommand `sample`"));
}

#[test]
fn resource_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = toruscover(&[
        "e123",
        "--epsilon",
        "1e-5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("epsilon"));
}

#[test]
fn cover_reports_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    for certifier in ["net", "adaptive"] {
        let run = dir.path().join(certifier);
        let out = toruscover(&[
            "cover",
            "--intensity",
            "12",
            "--certifier",
            certifier,
            "--out",
            run.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let report = read_json(&run.join("report.json"));
        assert!(report["verdict"]["status"].is_string());
    }
}
