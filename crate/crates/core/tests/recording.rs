use std::sync::Arc;

use delve::action::Action;
use delve::config::ConfigTables;
use delve::env::{Env, GreedyDescendPolicy, RandomPolicy, Task, TaskConfig};
use delve::error::RecordError;
use delve::recording::*;

fn random_record(task: Task, seed: u64, dir: &std::path::Path) -> EpisodeRecord {
    let mut cfg = TaskConfig::new(task);
    cfg.max_steps = 300;
    let mut env = Env::with_builtin(cfg).unwrap();
    let mut p = RandomPolicy::new(seed);
    let path = dir.join(format!("ep{seed}.rec"));
    record_episode(&mut env, ActionSource::Policy(&mut p), seed, seed ^ 0xabc, &path).unwrap()
}

#[test]
fn file_matches_returned_record() {
    let dir = tempfile::tempdir().unwrap();
    let rec = random_record(Task::Score, 1, dir.path());
    let loaded = load_record(&dir.path().join("ep1.rec")).unwrap();
    assert_eq!(loaded, rec);
    assert_eq!(rec.to_text(), std::fs::read_to_string(dir.path().join("ep1.rec")).unwrap());
    assert!(rec.footer.is_some());
    assert!(replay_verify(&rec, ConfigTables::builtin()).unwrap().ok());
}

#[test]
fn every_task_replays() {
    let dir = tempfile::tempdir().unwrap();
    for (i, task) in Task::ALL.into_iter().enumerate() {
        let rec = random_record(task, 10 + i as u64, dir.path());
        let rep = replay_verify(&rec, ConfigTables::builtin()).unwrap();
        assert!(rep.ok(), "{task}: {:?}", rep.first_divergence);
        assert_eq!(rep.steps_checked, rec.steps.len());
    }
}

/// Swaps the action of step `i` for a different allowed action.
fn mutate_action(rec: &EpisodeRecord, i: usize) -> EpisodeRecord {
    let mut m = rec.clone();
    let allowed = Action::parse_names(&rec.header.allowed_actions).unwrap();
    let cur = m.steps[i].action;
    let other = allowed.iter().map(|a| a.ascii()).find(|&a| a != cur).unwrap();
    m.steps[i].action = other;
    m
}

#[test]
fn action_mutation_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let rec = random_record(Task::Gold, 100 + seed, dir.path());
        let i = (seed as usize * 7) % rec.steps.len();
        let rep = replay_verify(&mutate_action(&rec, i), ConfigTables::builtin()).unwrap();
        let d = rep.first_divergence.expect("mutation detected");
        assert!(d.step == 0 || d.step > i, "{d:?} for mutation at {i}");
    }
}

#[test]
fn text_byte_flip_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let rec = random_record(Task::Score, 5, dir.path());
    let text = rec.to_text();
    let start = text.find("\nS ").unwrap() + 1;
    let end = text.rfind("\nE ").unwrap();
    for (k, pos) in (start..end).step_by(41).enumerate() {
        let mut bytes = text.clone().into_bytes();
        if bytes[pos] == b'\n' {
            continue;
        }
        bytes[pos] ^= 1 << (k % 7);
        let Ok(s) = String::from_utf8(bytes) else { continue };
        match parse_record(&s) {
            Err(_) => {}
            Ok(m) => {
                let rep = replay_verify(&m, ConfigTables::builtin());
                assert!(!matches!(rep, Ok(ref r) if r.ok()), "flip at {pos} undetected");
            }
        }
    }
}

#[test]
fn truncated_file_loads_complete_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let rec = random_record(Task::Score, 3, dir.path());
    let text = rec.to_text();
    let cut = text.find("\nS ").unwrap() + 1 + 3 * 25;
    let partial = parse_record(&text[..cut]).unwrap();
    assert!(partial.footer.is_none());
    assert!(partial.steps.len() < rec.steps.len());
    assert_eq!(partial.steps[..], rec.steps[..partial.steps.len()]);
    assert!(replay_verify(&partial, ConfigTables::builtin()).unwrap().ok());
}

#[test]
fn changed_table_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let rec = random_record(Task::Eat, 4, dir.path());
    let cfg = dir.path().join("cfg");
    ConfigTables::write_builtin(&cfg).unwrap();
    let path = cfg.join("nutrition.toml");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("corpse_base = 20", "corpse_base = 21")).unwrap();
    let tables = Arc::new(ConfigTables::load_dir(&cfg).unwrap());
    match replay_verify(&rec, tables) {
        Err(RecordError::StaleConfig { table, .. }) => assert_eq!(table, "nutrition"),
        other => panic!("expected stale config, got {other:?}"),
    }
    // Unchanged copies are still accepted.
    let cfg2 = dir.path().join("cfg2");
    ConfigTables::write_builtin(&cfg2).unwrap();
    let same = Arc::new(ConfigTables::load_dir(&cfg2).unwrap());
    assert!(replay_verify(&rec, same).unwrap().ok());
}

#[test]
fn foreign_action_table_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = random_record(Task::Score, 6, dir.path());
    rec.header.action_table = "0".repeat(64);
    assert!(matches!(
        replay_verify(&rec, ConfigTables::builtin()),
        Err(RecordError::ActionTableMismatch { .. })
    ));
}

#[test]
fn render_emits_one_frame_per_step_plus_initial() {
    let dir = tempfile::tempdir().unwrap();
    let rec = random_record(Task::Score, 8, dir.path());
    let mut out = Vec::new();
    let n = render_replay(&rec, ConfigTables::builtin(), None, FrameStyle::Plain, &mut out).unwrap();
    assert_eq!(n, rec.steps.len() + 1);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.matches("--- step ").count(), n);
    assert!(text.contains('@'));
    assert!(render_replay(&rec, ConfigTables::builtin(), Some(0.0), FrameStyle::Plain, &mut Vec::new()).is_err());
    let mut ansi = Vec::new();
    render_replay(&rec, ConfigTables::builtin(), None, FrameStyle::Ansi, &mut ansi).unwrap();
    assert!(ansi.contains(&0x1b));
}

#[test]
fn stats_over_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for seed in 0..6 {
        let mut env = Env::with_builtin(TaskConfig::new(Task::Staircase)).unwrap();
        let mut p = GreedyDescendPolicy::new(seed);
        let path = dir.path().join(format!("g{seed}.rec"));
        record_episode(&mut env, ActionSource::Policy(&mut p), seed, seed + 1, &path).unwrap();
        paths.push(path);
    }
    let st = extract_stats(&paths).unwrap();
    assert_eq!(st.episodes.len(), 6);
    assert_eq!(st.action_counts.values().sum::<usize>(), st.total_steps);
    let deaths = st.episodes.iter().filter(|e| e.death.is_some()).count();
    assert_eq!(st.death_causes.values().sum::<usize>(), deaths);
    let mut csv = Vec::new();
    st.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
    assert!(st.summary().contains("actions"));
    assert_eq!(read_header(&paths[0]).unwrap().game_seed, 0);
}

#[test]
fn listed_actions_stop_early_without_footer() {
    let dir = tempfile::tempdir().unwrap();
    let mut env = Env::with_builtin(TaskConfig::new(Task::Score)).unwrap();
    let acts = [Action::Search; 5];
    let path = dir.path().join("list.rec");
    let rec = record_episode(&mut env, ActionSource::List(&acts), 1, 2, &path).unwrap();
    assert_eq!(rec.steps.len(), 5);
    assert!(rec.footer.is_none());
    assert!(replay_verify(&load_record(&path).unwrap(), ConfigTables::builtin()).unwrap().ok());
}
