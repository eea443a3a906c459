use std::path::Path;
use std::process::{Command, Output};

use ceirm::lemma::{read_sweep_csv, write_sweep_csv};

fn ceirm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceirm"))
        .args(args)
        .env_remove(ceirm::harness::DATA_DIR_VAR)
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    ceirm(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["train"]), 1);
    assert_eq!(code(&["train", "--config", "/no/such/file.cfg"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "alpha = 1\nnot_a_key = 2\n").unwrap();
    let out = ceirm(&["train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&["lemma-sweep", "--dist-i", "cauchy", "--out", s(&dir.path().join("x.csv"))]), 1);
    assert_eq!(code(&["report", "--in", s(dir.path()), "--format", "xml"]), 1);
}

#[test]
fn missing_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mnist.cfg");
    std::fs::write(&cfg, format!("dataset = ac_cmnist\ndata_dir = {}\n", s(&dir.path().join("absent")))).unwrap();
    let out = ceirm(&["train", "--config", s(&cfg), "--out-dir", s(&dir.path().join("runs"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&["verify", "--sweep", s(&dir.path().join("none.csv"))]), 2);
    assert_eq!(code(&["report", "--in", s(&dir.path().join("nowhere"))]), 2);
}

#[test]
fn sweep_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    let out = ceirm(&["lemma-sweep", "--points", "5", "--n", "4000", "--seed", "1", "--out", s(&sweep)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let verdict = std::fs::read_to_string(dir.path().join("sweep.csv.verdict.txt")).unwrap();
    assert!(verdict.starts_with("verdict: PASS"));
    assert_eq!(String::from_utf8_lossy(&out.stdout), verdict);
    assert_eq!(code(&["verify", "--sweep", s(&sweep)]), 0);

    let mut rows = read_sweep_csv(&sweep).unwrap();
    rows[2].h_mix.nats = rows[2].bound - 1.0;
    let broken = dir.path().join("broken.csv");
    write_sweep_csv(&rows, &broken).unwrap();
    let out = ceirm(&["verify", "--sweep", s(&broken)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("verdict: FAIL"));
}

#[test]
fn train_and_report_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 3\ntrain_sizes = 200,200\ntest_size = 200\n").unwrap();
    let runs = dir.path().join("runs");
    let out = ceirm(&["train", "--config", s(&cfg), "--alpha", "1", "--beta", "0.5", "--seed", "2", "--out-dir", s(&runs)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(runs.join("train_a1_b0.5_s2.csv").exists());
    assert!(runs.join("train_a1_b0.5_s2.json").exists());

    let out = ceirm(&["report", "--in", s(&runs), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), ceirm::harness::CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 2);
}
