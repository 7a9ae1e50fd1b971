use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn moilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moilab")).args(args).output().expect("spawn moilab")
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_prints_every_experiment() {
    let o = moilab(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names.len(), 10);
    assert_eq!(names[0], "moi");
    for name in &names {
        assert!(bundled(name).exists(), "no bundled config for {name}");
    }

    let o = moilab(&["list", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 10);
    assert_eq!(arr[0], "moi");
}

#[test]
fn bundled_configs_validate() {
    for name in stdout(&moilab(&["list"])).lines() {
        let path = bundled(name);
        let o = moilab(&["validate", path.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains("valid"));
    }
}

#[test]
fn identities_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = moilab(&["run", bundled("identities").to_str().unwrap(), "--threads", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS ")));

    let csv = fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "draw,kind,function,dim,n,slot,residual,scale,relative");
    assert!(csv.lines().count() > 1);

    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("identities.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "identities");
    assert!(summary["config_digest"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["threads"], 1);
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["csv"], "identities.csv");
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let body = r#"{"experiment": "identities", "seed": 3, "draws": 8, "max_dim": 5, "max_n": 2}"#;
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), body);
        let o = moilab(&["run", cfg.to_str().unwrap(), "--threads", "1", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(fs::read(dir.path().join("identities.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn theta_reports_the_leading_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "theta-asymptotic", "output": {"stem": "theta"}}"#);
    let o = moilab(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("theta.json")).unwrap()).unwrap();
    let lead = summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "coefficient of t^(-1/2)")
        .unwrap();
    assert!((lead["value"].as_f64().unwrap() - 0.886_226_925_452_758).abs() < 1e-4);
}

#[test]
fn failed_tolerance_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "theta-asymptotic", "tolerance_constant": 1e-15}"#);
    let o = moilab(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL constant coefficient"));
    assert!(dir.path().join("theta-asymptotic.json").exists());
}

#[test]
fn order_beyond_max_order_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "moi", "n": 3, "function": {"name": "exp", "max_order": 2}}"#);
    for cmd in ["validate", "run"] {
        let o = moilab(&[cmd, cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()][..if cmd == "run" { 4 } else { 2 }]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("max_order"), "{}", stderr(&o));
    }
    assert!(!dir.path().join("moi.csv").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "taylor", "ordr": 3}"#);
    let o = moilab(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ordr"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_input_error() {
    let o = moilab(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
}
