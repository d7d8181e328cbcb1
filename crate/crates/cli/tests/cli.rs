use std::path::Path;
use std::process::{Command, Output};

fn maten_lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maten-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_RECOVERY: &str =
    r#"{"n_qubits": 2, "settings_grid": [4, 8], "shots_grid": [1000, "exact"], "trials": 3}"#;

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RECOVERY);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        std::fs::create_dir_all(out).unwrap();
        let res = maten_lab(&["local-recovery", "--config", &cfg, "--seed", seed], out);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["local-recovery.csv", "local-recovery-summary.csv"] {
        let ra = std::fs::read(a.join(name)).unwrap();
        assert_eq!(ra, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert_ne!(ra, std::fs::read(c.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn outputs_start_with_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RECOVERY);
    let res = maten_lab(&["local-recovery", "--config", &cfg, "--seed", "11"], dir.path());
    assert!(res.status.success());
    let text = std::fs::read_to_string(dir.path().join("local-recovery.csv")).unwrap();
    let mut lines = text.lines();
    let echo: serde_json::Value =
        serde_json::from_str(lines.next().unwrap().strip_prefix("# config ").unwrap()).unwrap();
    assert_eq!(echo["seed"], 11);
    assert_eq!(echo["trials"], 3);
    assert_eq!(lines.next(), Some("n_settings,shots,trial,l2"));
    assert_eq!(lines.count(), 2 * 2 * 3);
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n_qubit": 3}"#);
    let res = maten_lab(&["local-recovery", "--config", &cfg], dir.path());
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("n_qubit"));
}

#[test]
fn characterize_ingests_measured_data() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ingest_line3.csv");
    let cfg = write_config(dir.path(), r#"{"n_qubits": 3}"#);
    let res = maten_lab(&["characterize", "--config", &cfg, "--ingest", fixture.to_str().unwrap()], dir.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = std::fs::read_to_string(dir.path().join("characterize-correlations.csv")).unwrap();
    let body: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "qubit,ingest_line3");
    assert_eq!(body.len(), 4);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("characterize.json")).unwrap()).unwrap();
    assert_eq!(doc["scenarios"][0]["result"]["qubits"].as_array().unwrap().len(), 3);
}

#[test]
fn ingest_with_the_wrong_register_size_fails() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ingest_line3.csv");
    let cfg = write_config(dir.path(), r#"{"n_qubits": 4}"#);
    let res = maten_lab(&["characterize", "--config", &cfg, "--ingest", fixture.to_str().unwrap()], dir.path());
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("3 qubits"));
}
