use std::path::Path;

use assert_cmd::Command;
use predicates::prelude::*;

fn delve() -> Command {
    let mut c = Command::cargo_bin("delve").unwrap();
    c.env_remove("DELVE_CONFIG_DIR");
    c
}

fn record_some(dir: &Path, n: usize) {
    delve()
        .args(["eval", "--task", "staircase", "--max-steps", "150", "-n"])
        .arg(n.to_string())
        .arg("--out")
        .arg(dir.join("eval.csv"))
        .arg("--record-dir")
        .arg(dir.join("recs"))
        .assert()
        .success();
}

#[test]
fn gen_prints_a_full_map() {
    let out = delve().args(["gen", "--seed", "7", "--depth", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().all(|l| l.len() == 79));
    assert!(text.contains('>'));
    let again = delve().args(["gen", "--seed", "7", "--depth", "1"]).output().unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
    delve()
        .args(["gen", "--seed", "7", "--depth", "3", "--validate"])
        .assert()
        .success()
        .stdout(predicate::str::contains("valid: true"));
}

#[test]
fn argument_errors_exit_1() {
    delve().args(["gen", "--depth", "0"]).assert().code(1);
    delve().args(["bench", "--duration", "0"]).assert().code(1);
    delve().args(["eval", "-n", "-3"]).assert().code(1);
    delve().args(["eval", "--task", "bogus-task"]).assert().code(1);
    delve().args(["eval", "--character", "xyz-abc"]).assert().code(1);
    delve().args(["frobnicate"]).assert().code(1);
    delve().args(["play"]).assert().code(1).stderr(predicate::str::contains("terminal"));
    delve().arg("--help").assert().code(0);
}

#[test]
fn bench_reports_a_row() {
    delve()
        .args(["bench", "--duration", "0.3", "--instances", "2"])
        .assert()
        .success()
        .stdout(predicate::str::contains("instances").and(predicate::str::contains("score")));
    let out = delve().args(["bench", "--duration", "0.2", "--json"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["policy"], "uniform-random");
    assert!(v["sps"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    delve()
        .args(["eval", "--task", "staircase", "--policy", "greedy-descend", "-n", "12", "--max-steps", "200"])
        .arg("--out")
        .arg(&csv)
        .assert()
        .success()
        .stdout(
            predicate::str::contains("mon-hum-neu-mal")
                .and(predicate::str::contains("training seeds"))
                .and(predicate::str::contains("success rate")),
        );
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 13);
}

#[test]
fn eval_reads_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.toml");
    std::fs::write(
        &env,
        "task = \"gold\"\nmax_steps = 50\nallowed_actions = [\"north\", \"east\", \"south\", \"west\"]\n\n[seeds]\nmaster = 9\ntrain_size = 20\n",
    )
    .unwrap();
    delve()
        .args(["eval", "-n", "3", "--env"])
        .arg(&env)
        .arg("--out")
        .arg(dir.path().join("g.csv"))
        .assert()
        .success()
        .stdout(predicate::str::contains("gold").and(predicate::str::contains("20 (master seed 9)")));
    delve()
        .args(["eval", "-n", "3", "--task", "eat", "--env"])
        .arg(&env)
        .assert()
        .code(1);
}

#[test]
fn replay_and_stats_over_recorded_episodes() {
    let dir = tempfile::tempdir().unwrap();
    record_some(dir.path(), 5);
    let recs: Vec<_> = std::fs::read_dir(dir.path().join("recs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(recs.len(), 5);
    delve()
        .arg("replay")
        .arg(&recs[0])
        .arg("--verify")
        .assert()
        .success()
        .stdout(predicate::str::starts_with("ok:"));
    delve()
        .arg("replay")
        .arg(&recs[0])
        .assert()
        .success()
        .stdout(predicate::str::contains("--- step 0 ---").and(predicate::str::contains("frames")));

    let out = delve().arg("stats").arg(dir.path().join("recs")).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
    let pattern = format!("{}/*.rec", dir.path().join("recs").display());
    let csv = dir.path().join("s.csv");
    delve()
        .args(["stats", &pattern, "--summary", "--out"])
        .arg(&csv)
        .assert()
        .success()
        .stderr(predicate::str::contains("actions"));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 6);
}

#[test]
fn bad_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    delve().args(["replay", "/nonexistent/x.rec"]).assert().code(2);
    let junk = dir.path().join("junk.rec");
    std::fs::write(&junk, "hello\n").unwrap();
    delve()
        .arg("replay")
        .arg(&junk)
        .assert()
        .code(2)
        .stderr(predicate::str::contains("corrupt"));
    delve().arg("stats").arg(&junk).assert().code(2);
    delve().args(["stats", "/nonexistent/*.rec"]).assert().code(2);
}

#[test]
fn config_dir_override_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    record_some(dir.path(), 1);
    let rec = std::fs::read_dir(dir.path().join("recs")).unwrap().next().unwrap().unwrap().path();

    delve()
        .env("DELVE_CONFIG_DIR", dir.path().join("missing"))
        .arg("replay")
        .arg(&rec)
        .arg("--verify")
        .assert()
        .code(2);

    let cfg = dir.path().join("cfg");
    delve::config::ConfigTables::write_builtin(&cfg).unwrap();
    delve()
        .env("DELVE_CONFIG_DIR", &cfg)
        .arg("replay")
        .arg(&rec)
        .arg("--verify")
        .assert()
        .success();
    let nut = cfg.join("nutrition.toml");
    let text = std::fs::read_to_string(&nut).unwrap();
    std::fs::write(&nut, text.replace("starting_nutrition = 900", "starting_nutrition = 901")).unwrap();
    delve()
        .env("DELVE_CONFIG_DIR", &cfg)
        .arg("replay")
        .arg(&rec)
        .arg("--verify")
        .assert()
        .code(2)
        .stderr(predicate::str::contains("stale config"));
}
