use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iscap_cli::snapshot::{read_snapshot, SNAPSHOT_HEADER};
use iscap_cli::sweep::CSV_HEADER;

const SMALL: &str = r#"
seed = 11
realizations = 2
families = ["OPT", "CSCG"]

[ofdm]
k = 4
k_g = 2

[channel]
tap_count = 2

[sweep]
c_min = [0.0, 0.2]
s_max = [-0.5, 1e9]

[oracle]
instances = 2
frames = 200000

[snapshot]
family = "OPT"
c_min = 0.1
s_max = -0.5
"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("iscap-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

fn iscap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iscap")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn sweep_writes_csv_with_header() {
    let dir = scratch("sweep");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("region.csv");
    let o = iscap(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 2 * 4);
}

#[test]
fn sweep_is_thread_independent_and_follows_the_seed() {
    let dir = scratch("stdout");
    let cfg = write_config(&dir, SMALL);
    let a = iscap(&["sweep", "--config", cfg.to_str().unwrap(), "--threads", "1"]);
    let b = iscap(&["sweep", "--config", cfg.to_str().unwrap(), "--threads", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = iscap(&["sweep", "--config", cfg.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn validate_passes_and_k4_fault_is_caught() {
    let dir = scratch("validate");
    let cfg = write_config(&dir, SMALL);
    let ok = iscap(&["validate", "--config", cfg.to_str().unwrap()]);
    let report = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(code(&ok), 0, "{report}");
    assert!(report.contains("PASS"));
    let bad = iscap(&["validate", "--config", cfg.to_str().unwrap(), "--self-test-k4-fault"]);
    assert_eq!(code(&bad), 1, "{}", String::from_utf8_lossy(&bad.stdout));
}

#[test]
fn snapshot_round_trips() {
    let dir = scratch("snapshot");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("snap.csv");
    let o = iscap(&["snapshot", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let input = read_snapshot(fs::File::open(&out).unwrap()).unwrap().expect("feasible design");
    assert_eq!(input.k(), 4);
    assert!((input.total_power() - 10.0).abs() < 1e-6);
}

#[test]
fn infeasible_snapshot_is_header_only() {
    let dir = scratch("snapshot-infeasible");
    let cfg = write_config(&dir, &SMALL.replace("c_min = 0.1", "c_min = 50.0"));
    let o = iscap(&["snapshot", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), SNAPSHOT_HEADER.join(","));
    assert!(read_snapshot(o.stdout.as_slice()).unwrap().is_none());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = scratch("config");
    let empty = write_config(&dir, "\n");
    assert_eq!(code(&iscap(&["sweep", "--config", empty.to_str().unwrap()])), 2);

    let bad = write_config(&dir, "seed = 1\n[ofdm]\nk = 4\nk_g = 7\n");
    let o = iscap(&["sweep", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let missing = dir.join("absent.toml");
    assert_eq!(code(&iscap(&["validate", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&iscap(&["frobnicate"])), 2);
}
