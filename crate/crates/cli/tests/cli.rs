use std::fs;
use std::process::{Command, Output};

fn cotforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cotforge")).args(args).output().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cotforge(&["--bogus", "curate"]).status.code(), Some(1));
    assert_eq!(cotforge(&[]).status.code(), Some(1));
    assert_eq!(cotforge(&["--workers", "0", "stats"]).status.code(), Some(1));
    assert_eq!(cotforge(&["--provider", "http", "stats"]).status.code(), Some(1));
    assert_eq!(cotforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_exits_one() {
    let out = cotforge(&["--config", "/nonexistent/cotforge.toml", "curate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stage_without_input_exits_two_with_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cotforge(&["--out", d, "verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tasks.jsonl"));
    assert!(dir.path().join("verify.ledger.jsonl").exists());
    assert!(!dir.path().join("verified.jsonl").exists());
}

#[test]
fn consensus_sim_writes_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cotforge(&["--out", d, "--seed", "3", "consensus-sim"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("consensus_grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("consensus-sim\t"));
}

#[test]
fn config_file_values_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("seed = 4\noutput_dir = \"{}\"\n[synthesis]\ninstructions_per_concept = 1\n", dir.path().join("a").display())).unwrap();
    let c = cfg.to_str().unwrap();
    let out = cotforge(&["--config", c, "curate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("a/curated.jsonl").exists());
    let b = dir.path().join("b");
    let out = cotforge(&["--config", c, "--out", b.to_str().unwrap(), "curate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(b.join("curated.jsonl").exists());
    let stats = cotforge(&["--out", b.to_str().unwrap(), "stats"]);
    assert!(String::from_utf8_lossy(&stats.stdout).contains("curated.jsonl\t5"));
}
