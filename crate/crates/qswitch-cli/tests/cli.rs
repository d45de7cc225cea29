use std::path::Path;
use std::process::{Command, Output};

fn qswitch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qswitch")).args(args).env_remove("QSWITCH_WORKERS").output().expect("running qswitch")
}

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let o = out.to_str().unwrap();
    let mut args = vec!["run", "--preset", "init_b", "--level", "ft", "--shots", "60", "--seed", "5", "--out", o];
    args.extend_from_slice(extra);
    qswitch(&args)
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn list_presets_prints_the_building_blocks() {
    let o = qswitch(&["list-presets"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    for name in ["init_b", "t_gate", "switch_b_to_a", "switch_a_to_b", "cnot:t"] {
        assert!(s.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn run_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "settings.csv", "result.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["seed"], 5);
    let files = manifest["files"].as_object().unwrap();
    let results = std::fs::read(dir.path().join("results.csv")).unwrap();
    let digest = files["results.csv"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    use sha2::Digest;
    let want: String = sha2::Sha256::digest(&results).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(digest, want);
    let header = read(&dir.path().join("results.csv")).lines().next().unwrap().to_string();
    assert!(header.contains("fidelity") && header.contains("acceptance_rate"), "{header}");
}

#[test]
fn same_seed_same_bytes_for_any_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_small(a.path(), &["--workers", "1"]).status.success());
    assert!(run_small(b.path(), &["--workers", "3"]).status.success());
    for f in ["results.csv", "settings.csv", "manifest.json"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"preset": "t_gate", "level": "nft", "shots": 40, "seed": 1, "noise": {"p2": 0.01}}"#).unwrap();
    let out = dir.path().join("o");
    let o = qswitch(&["run", "--config", cfg.to_str().unwrap(), "--noise", "p1=0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["noise"]["p2"], 0.01);
    assert_eq!(manifest["config"]["noise"]["p1"], 0.0);
    assert_eq!(manifest["config"]["preset"], "t_gate");
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(qswitch(&["run", "--preset", "nope", "--level", "ft", "--shots", "5", "--seed", "1", "--out", o]).status.code(), Some(1));
    assert_eq!(run_small(dir.path(), &["--noise", "p9=0.1"]).status.code(), Some(1));
    assert_eq!(run_small(dir.path(), &["--shots", "0"]).status.code(), Some(1));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"preset": "init_b", "level": "ft", "shots": 5, "seed": 1, "colour": 3}"#).unwrap();
    assert_eq!(qswitch(&["run", "--config", cfg.to_str().unwrap(), "--out", o]).status.code(), Some(1));
}

#[test]
fn verify_reports_violations_through_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let ft = qswitch(&["verify", "--preset", "switch_a_to_b", "--level", "ft", "--expect-ft", "--out", o]);
    assert_eq!(ft.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ft.stdout).contains("0 violations"));
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("verify.json"))).unwrap();
    assert_eq!(report["violations"], 0);

    let nft = qswitch(&["verify", "--preset", "switch_b_to_a", "--level", "nft", "--expect-ft", "--out", o]);
    assert_eq!(nft.status.code(), Some(2));
}
