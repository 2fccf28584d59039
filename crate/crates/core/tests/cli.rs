use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_atomtwin"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn record(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn ideal_ghz_record() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(dir.path(), &["ghz", "--n", "4", "--ideal", "--shots", "500"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("fidelity=1.0000"), "{stdout}");
    let doc = record(dir.path(), "ghz");
    assert_eq!(doc["command"], "ghz");
    assert!((doc["metrics"]["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let counts = doc["histogram"]["counts"].as_object().unwrap();
    assert!(counts.keys().all(|k| k == "0000" || k == "1111"));
    assert_eq!(counts.values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 500);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("ghz_parity.csv").exists());
}

#[test]
fn qaoa_reference_angles() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(dir.path(), &["qaoa", "--graph", "t4", "--p", "1", "--ideal"]);
    assert_eq!(code, 0, "{err}");
    let r = record(dir.path(), "qaoa")["metrics"]["approximation_ratio"].as_f64().unwrap();
    assert!((r - 0.772).abs() < 0.005, "{r}");
}

#[test]
fn noisy_runs_repeat_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run(d.path(), &["ghz", "--n", "3", "--shots", "400", "--seed", "42"]).0, 0);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("ghz.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = tempfile::tempdir().unwrap();
    run(c.path(), &["ghz", "--n", "3", "--shots", "400", "--seed", "43"]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn compile_builtin_writes_circuit() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["compile", "--builtin", "qpe-h2"]).0, 0);
    let text = std::fs::read_to_string(dir.path().join("compile_circuit.txt")).unwrap();
    let c = atomtwin::compiler::parse_text(&text).unwrap();
    assert_eq!(c.n_qubits(), 4);
    assert!(record(dir.path(), "compile")["metrics"]["connectivity_ok"].as_bool().unwrap());
}

#[test]
fn analytic_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["trap-report"]).0, 0);
    let m = &record(dir.path(), "trap_report")["metrics"];
    assert!((m["it_ratio"].as_f64().unwrap() - 1.17).abs() < 0.01);
    assert_eq!(run(dir.path(), &["rearrange", "--fill", "0.7"]).0, 0);
    assert!(record(dir.path(), "rearrange")["metrics"]["targets_filled"].as_bool().unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["no-such-command"]).0, 2);
    assert_eq!(run(dir.path(), &["ghz", "--n", "abc"]).0, 2);
    let (code, _, err) = run(dir.path(), &["ghz", "--n", "9"]);
    assert_eq!(code, 1, "{err}");
    assert!(err.starts_with("error:"));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["--config", bad.to_str().unwrap(), "trap-report"]).0, 1);
    assert_eq!(run(dir.path(), &["qaoa", "--graph", "nope"]).0, 2);
}

#[test]
fn pumped_initial_state_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ones.toml");
    let text = atomtwin::cli::DEFAULT_CONFIG.replace("initial_state = \"zeros\"", "initial_state = \"ones\"");
    std::fs::write(&cfg, text).unwrap();
    let (code, _, err) = run(dir.path(), &["--config", cfg.to_str().unwrap(), "ghz", "--n", "2", "--ideal"]);
    assert_eq!(code, 0, "{err}");
    // H then CNOT on |11> gives (|01> - |10>)/sqrt 2
    let doc = record(dir.path(), "ghz");
    assert!(doc["histogram"]["counts"].as_object().unwrap().keys().all(|k| k == "01" || k == "10"));
}
