use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use axiflow::record::RunRecord;

const SPHERE: &str = r#"
n = 2
nodes = 48
[speed]
kind = "mean-power"
alpha = 1.0
[shape]
kind = "sphere"
radius = 1.0
[output]
checkpoint_every = 50
snapshot_every = 5
"#;

fn axiflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axiflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("AXIFLOW_OUT")
        .output()
        .unwrap()
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

#[test]
fn simulate_sphere_reaches_extinction_time() {
    let dir = setup(SPHERE);
    let out = axiflow(dir.path(), &["simulate", "--config", "run.toml", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = RunRecord::read_dir(&dir.path().join("o/run")).unwrap();
    let t = rec.last().unwrap().t;
    assert!((t - 0.25).abs() < 0.25 * 1e-2, "{t}");
    assert!(!rec.snapshots.is_empty());
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = setup(SPHERE);
    for o in ["a", "b"] {
        assert!(axiflow(dir.path(), &["simulate", "--config", "run.toml", "--out", o]).status.success());
    }
    for f in ["run/checkpoints.jsonl", "run/meta.json", "run/snapshots/snap_00000.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn audit_of_stored_record_passes_strict() {
    let dir = setup(SPHERE);
    assert!(axiflow(dir.path(), &["simulate", "--config", "run.toml", "--out", "o"]).status.success());
    fs::write(dir.path().join("audit.toml"), format!("{SPHERE}\n[audit]\nrecord = \"o/run\"\n")).unwrap();
    let out = axiflow(dir.path(), &["audit", "--config", "audit.toml", "--out", "o", "--strict"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/audit.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn verify_algebra_has_no_violations() {
    let dir = setup("seed = 7\n[algebra]\nidentity = 2000\nreaction = 2000\n");
    let out = axiflow(dir.path(), &["verify-algebra", "--config", "run.toml", "--out", "o", "--strict"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/algebra.json")).unwrap()).unwrap();
    assert_eq!(report["violations"], 0);
    assert_eq!(report["seed"], 7);
}

#[test]
fn speeds_report_for_sigma2() {
    let dir = setup("n = 3\n[speed]\nkind = \"sigma2-power\"\nalpha = 2.0\n");
    let out = axiflow(dir.path(), &["speeds", "--config", "run.toml", "--out", "o", "--strict"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/speeds.json")).unwrap()).unwrap();
    assert_eq!(report["assumptions"]["pass"], true);
}

#[test]
fn low_homogeneity_is_a_config_error() {
    let dir = setup("[speed]\nkind = \"mean-power\"\nalpha = 0.5\n");
    let out = axiflow(dir.path(), &["simulate", "--config", "run.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("homogeneity must be >= 1"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn malformed_config_and_missing_record() {
    let dir = setup("nodes = \"many\"\n");
    assert_eq!(axiflow(dir.path(), &["simulate", "--config", "run.toml"]).status.code(), Some(2));
    fs::write(dir.path().join("run.toml"), "[audit]\nrecord = \"nowhere\"\n").unwrap();
    assert_eq!(axiflow(dir.path(), &["audit", "--config", "run.toml", "--out", "o"]).status.code(), Some(5));
}

#[test]
fn output_directory_from_environment() {
    let dir = setup("");
    let out = Command::new(env!("CARGO_BIN_EXE_axiflow"))
        .args(["verify-algebra", "--config", "run.toml"])
        .current_dir(dir.path())
        .env("AXIFLOW_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/algebra.json").exists());
}
