use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vacuum-probe")).args(args).env("RUST_LOG", "warn").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const MEASURE: &str = r#"{
  "alpha": 1.0,
  "system": { "kappa": 0.005, "gamma_e": 0.01, "schedule": { "duration": 20.0 } }
}"#;

#[test]
fn measure_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), MEASURE);
    let out = dir.path().join("out");
    let (code, err) = run(&["measure", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("measure.json")).unwrap()).unwrap();
    let r = &v["result"];
    let total = r["p_vacuum"].as_f64().unwrap() + r["p_not_vacuum"].as_f64().unwrap() + r["p_sink"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-9);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "measure");
    assert_eq!(m["config"]["workers"], 2);
}

#[test]
fn fig3_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"{ "alphas": [0.5], "kappas": [0.0, 0.01], "t_search": { "t_min": 5, "t_max": 100, "grid": 5, "rel_tol": 0.01 },
             "system": { "kappa": 0.0, "gamma_e": 0.01, "schedule": { "duration": 100.0 } } }"#,
    );
    let out = dir.path().join("o");
    let (code, err) = run(&["sweep-fig3", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out.join("fig3.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,kappa,T_opt,fidelity,p_success,p_vacuum,p_sink");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.5,0,"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = config(dir.path(), r#"{ "alpah": 1.0 }"#);
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["measure", "--config", &bad_key, "--out", o]).0, 2);
    let good = config(dir.path(), MEASURE);
    assert_eq!(run(&["fig5", "--config", &good, "--out", o]).0, 2);
    assert_eq!(run(&["measure", "--config", "/nonexistent/run.json", "--out", o]).0, 2);
    assert_eq!(run(&["measure"]).0, 2);
    let mismatch = config(dir.path(), r#"{ "experiment": "scissors" }"#);
    assert_eq!(run(&["measure", "--config", &mismatch, "--out", o]).0, 2);
    let negative = config(dir.path(), r#"{ "alpha": -0.5 }"#);
    assert_eq!(run(&["measure", "--config", &negative, "--out", o]).0, 2);
    assert_eq!(run(&["measure", "--config", &good, "--out", o, "--workers", "0"]).0, 2);
}

#[test]
fn numerical_failure_exits_3() {
    // two lossy modes at the coherent-state truncation exceed the
    // density-matrix dimension cap
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"{ "modes": 2, "alpha": 1.0, "system": { "kappa": 0.005, "gamma_e": 0.01, "schedule": { "duration": 100.0 } } }"#,
    );
    let (code, err) = run(&["joint-vacuum", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        vacuum_probe::harness::RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 4);
}
