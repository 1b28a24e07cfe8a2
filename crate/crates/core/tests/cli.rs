use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sheetgame::cli::{fmt_num, EXIT_CHECK_FAILED, EXIT_OK, EXIT_PARSE};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sheetgame"));
    c.env("RUST_LOG", "error").env_remove("SHEETGAME_WORKERS");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(sub).arg("--config").arg(cfg).arg("--out").arg(out).args(extra).output().unwrap()
}

#[test]
fn missing_grid_size_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nnx = 4\n").unwrap();
    let o = run("wellposedness", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(EXIT_PARSE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nt"));
}

#[test]
fn unknown_key_and_bad_flags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nnt = 4\nnx = 4\n[run]\nseeed = 3\n").unwrap();
    assert_eq!(run("wellposedness", &cfg, tmp.path(), &[]).status.code(), Some(EXIT_PARSE));
    assert_eq!(bin().arg("no-such-command").output().unwrap().status.code(), Some(EXIT_PARSE));
    assert_eq!(bin().arg("wellposedness").output().unwrap().status.code(), Some(EXIT_PARSE));
    let good = config("wellposedness.toml");
    assert_eq!(run("wellposedness", &good, tmp.path(), &["--workers", "zero"]).status.code(), Some(EXIT_PARSE));
}

#[test]
fn missing_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("grid_only.toml");
    fs::write(&cfg, "[grid]\nnt = 4\nnx = 4\n").unwrap();
    let o = run("solve-example2", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(EXIT_PARSE));
}

#[test]
fn example2_quadrant_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("q");
    let o = run("solve-example2", &config("example2_quadrant.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution.csv", "diagnostics.csv", "nash_report.csv", "stationarity.csv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let sol = fs::read_to_string(out.join("solution.csv")).unwrap();
    let mut lines = sol.lines();
    assert_eq!(lines.next().unwrap(), "t,x,mean_u1,mean_u2,mean_Y,mean_p1,mean_p2");
    assert_eq!(lines.count(), 81);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("[config]"));
    assert!(manifest.contains("timestamp ="));
}

#[test]
fn failed_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("check-nash", &config("example1_deterministic.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(EXIT_CHECK_FAILED));
    let report = fs::read_to_string(tmp.path().join("nash_report.csv")).unwrap();
    assert!(report.starts_with("player,direction_id,epsilon,delta_J,stderr,pass"));
    assert!(report.contains(",false"));
}

#[test]
fn seed_override_changes_sheet_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, "[grid]\nnt = 4\nnx = 4\n[run]\nseed = 1\npaths = 200\n[sheet]\npairs = [[[1.0, 1.0], [1.0, 1.0]]]\n").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    run("simulate-sheet", &cfg, &a, &[]);
    run("simulate-sheet", &cfg, &b, &["--seed", "2"]);
    bin().arg("simulate-sheet").arg("--config").arg(&cfg).arg("--out").arg(&c).env("SHEETGAME_WORKERS", "3").output().unwrap();
    let read = |d: &Path| fs::read(d.join("sheet_path0.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
    assert!(fs::read_to_string(c.join("manifest.txt")).unwrap().contains("workers = 3"));
}

#[test]
fn numbers_round_trip() {
    for v in [0.0, -0.4, 1.0 / 3.0, 1e-12, 123456.789, -2.5e7] {
        let s = fmt_num(v);
        assert!(!s.contains('e'), "{s}");
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
