//! End-to-end runs of the `repeater` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ensemble_repeater::cli::{defaults_reference, Columns, LevelRow};

fn repeater(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repeater"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = repeater(dir.path(), &["simulate", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("o/simulate.csv");
    assert_eq!(header(&csv), LevelRow::COLUMNS.join(","));
    assert!(fs::read_to_string(&csv).unwrap().lines().count() > 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/simulate.summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn seeded_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mc.toml"), "[sweep]\nmc_samples = 2000\n").unwrap();
    for o in ["a", "b"] {
        let out = repeater(
            dir.path(),
            &["simulate", "--config", "mc.toml", "--seed", "17", "--format", "json", "--out", o],
        );
        assert_eq!(code(&out), 0);
    }
    let a = fs::read(dir.path().join("a/simulate.json")).unwrap();
    let b = fs::read(dir.path().join("b/simulate.json")).unwrap();
    assert_eq!(a, b);

    let out = repeater(
        dir.path(),
        &["simulate", "--config", "mc.toml", "--seed", "18", "--format", "json", "--out", "c"],
    );
    assert_eq!(code(&out), 0);
    assert_ne!(a, fs::read(dir.path().join("c/simulate.json")).unwrap());
}

#[test]
fn infeasible_target_exits_2_with_header() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("hard.toml"),
        "[sweep]\nf_target = 0.99999\n[repeater.noise]\neta = 0.5\nD = 1e-2\n",
    )
    .unwrap();
    let out = repeater(dir.path(), &["optimize", "--config", "hard.toml", "--out", "o"]);
    assert_eq!(code(&out), 2);
    assert_eq!(header(&dir.path().join("o/optimize.csv")), LevelRow::COLUMNS.join(","));
}

#[test]
fn bad_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[repeater]\np_c = 2.0\n").unwrap();
    for args in [
        &["simulate", "--config", "bad.toml"][..],
        &["simulate", "--config", "missing.toml"],
        &["simulate", "--enp", "phase@0"],
        &["simulate", "--scheme", "teleport"],
        &["no-such-command"],
    ] {
        let out = repeater(dir.path(), args);
        assert_eq!(code(&out), 3, "{args:?}");
    }
}

#[test]
fn defaults_match_reference_file() {
    let reference = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml")).unwrap();
    assert_eq!(reference, defaults_reference());
    let dir = tempfile::tempdir().unwrap();
    let out = repeater(dir.path(), &["defaults"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), reference);
}

#[test]
fn oracle_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = repeater(dir.path(), &["oracle-verify", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(dir.path().join("o/oracle_verify.txt")).unwrap();
    assert!(text.contains("PASS") && !text.lines().any(|l| l.starts_with("FAIL")));
    assert!(dir.path().join("o/coefficient_tables.txt").exists());
}
