//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `DELVE_BENCH_SECS` shortens the two throughput runs (default 60 s each).
//! A criterion that cannot hold on the current machine (parallel scaling with
//! fewer cores than instances) is still reported as FAIL, tagged
//! `[machine-limited]`, and does not change the exit code.

use std::collections::HashSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use delve::action::Action;
use delve::bench::cmd_bench;
use delve::config::ConfigTables;
use delve::dungeon::{generate_level, oracle_depth, validate_level, GenConfig, Pos, MAP_TILES};
use delve::engine::GameState;
use delve::env::{
    EndReason, Env, RandomPolicy, SeedPool, Task, TaskConfig, Policy, TEST_SEEDS, TIME_PENALTY,
};
use delve::observe::{bl, TileVisibility};
use delve::recording::{
    load_record, record_episode, replay_verify, ActionSource, EpisodeRecord,
};

struct Verdict {
    name: &'static str,
    pass: bool,
    machine_limited: bool,
    detail: String,
}

impl Verdict {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Verdict {
            name,
            pass,
            machine_limited: false,
            detail,
        }
    }
}

fn tables() -> Arc<ConfigTables> {
    ConfigTables::builtin()
}

/// Reward with the time penalty removed, as an exact integer.
fn base_reward(reward: f64, time_advanced: bool) -> i64 {
    let r = if time_advanced { reward } else { reward - TIME_PENALTY };
    let n = r.round();
    assert!((r - n).abs() < 1e-9, "non-integral task reward {r}");
    n as i64
}

type Stream = Vec<(Vec<u8>, u64, bool)>;

fn drive(task: Task, seed: u64, actions: &[usize]) -> Stream {
    let mut env = Env::new(TaskConfig::new(task), tables()).unwrap();
    env.reset(seed, seed.wrapping_mul(31).wrapping_add(7)).unwrap();
    let mut out = vec![(env.observation().to_flat(), 0, false)];
    for &a in actions {
        let r = env.step(a % env.allowed_actions().len()).unwrap();
        out.push((env.observation().to_flat(), r.reward.to_bits(), r.done));
        if r.done {
            break;
        }
    }
    out
}

fn determinism() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xde7e);
    let mut bad = Vec::new();
    for i in 0..200 {
        let task = Task::ALL[i % Task::ALL.len()];
        let seed: u64 = rng.random();
        let len = rng.random_range(20..400);
        let actions: Vec<usize> = (0..len).map(|_| rng.random_range(0..64)).collect();
        if drive(task, seed, &actions) != drive(task, seed, &actions) {
            bad.push(format!("stream {i}"));
            continue;
        }
        let mut files = Vec::new();
        for k in 0..2 {
            let mut env = Env::new(TaskConfig::new(task), tables()).unwrap();
            let allowed = env.allowed_actions().to_vec();
            let list: Vec<Action> = actions.iter().map(|a| allowed[a % allowed.len()]).collect();
            let path = dir.path().join(format!("d{i}_{k}.rec"));
            let episode = seed.wrapping_mul(31).wrapping_add(7);
            record_episode(&mut env, ActionSource::List(&list), seed, episode, &path).unwrap();
            files.push(std::fs::read(&path).unwrap());
        }
        if files[0] != files[1] {
            bad.push(format!("record {i}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        "determinism",
        bad.is_empty() && secs < 120.0,
        format!("200 pairs over 7 tasks, {} mismatches, {secs:.1}s", bad.len()),
    )
}

fn throughput() -> Vec<Verdict> {
    let secs: u64 = std::env::var("DELVE_BENCH_SECS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let d = Duration::from_secs(secs);
    let cfg = TaskConfig::new(Task::Score);
    let single = cmd_bench(&cfg, tables(), d, 1, 1).unwrap();
    let multi = cmd_bench(&cfg, tables(), d, 8, 1).unwrap();
    let ratio = multi.sps / single.sps;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut scaling = Verdict::new(
        "throughput-scaling",
        ratio >= 4.0,
        format!(
            "8 instances {:.0} SPS = {ratio:.2}x single (need 4x), {cores} core(s) available",
            multi.sps
        ),
    );
    scaling.machine_limited = !scaling.pass && cores < 8;
    vec![
        Verdict::new(
            "throughput-single",
            single.sps >= 10_000.0,
            format!(
                "{:.0} SPS over {:.1}s (gate 10000, floor 5000)",
                single.sps, single.duration_sec
            ),
        ),
        scaling,
    ]
}

fn oracle() -> Verdict {
    let start = Instant::now();
    const N: usize = 10_000;
    let mut counts = [0usize; 5];
    let mut outside = 0;
    for seed in 0..N as u64 {
        match oracle_depth(seed) {
            d @ 5..=9 => counts[(d - 5) as usize] += 1,
            _ => outside += 1,
        }
    }
    let expected = N as f64 / 5.0;
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / N as f64).collect();
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(chi2);
    let secs = start.elapsed().as_secs_f64();
    let pass = outside == 0
        && freqs.iter().all(|f| (f - 0.2).abs() <= 0.015)
        && p > 0.01
        && secs < 30.0;
    Verdict::new(
        "oracle-placement",
        pass,
        format!("freqs {freqs:.4?}, outside {outside}, chi2 {chi2:.2}, p {p:.3}"),
    )
}

fn level_validity() -> Verdict {
    let start = Instant::now();
    let cfg = GenConfig::default();
    let mut bad = 0;
    let mut first = None;
    for seed in 0..1000u64 {
        for depth in 1..=12 {
            let ok = match generate_level(seed, depth, &cfg) {
                Ok(bp) => validate_level(&bp, cfg.max_depth).is_valid(),
                Err(_) => false,
            };
            if !ok {
                bad += 1;
                first.get_or_insert((seed, depth));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        "level-validity",
        bad == 0 && secs < 60.0,
        format!("12000 levels, {bad} invalid (first {first:?}), {secs:.1}s"),
    )
}

/// Tiles not unseen, counted from the level memories directly.
fn known_tiles(g: &GameState) -> i64 {
    g.levels()
        .map(|l| {
            (0..MAP_TILES)
                .filter(|&i| l.vision.get(Pos::from_index(i)) != TileVisibility::Unseen)
                .count() as i64
        })
        .sum()
}

fn scout() -> Verdict {
    let mut env = Env::new(TaskConfig::new(Task::Scout), tables()).unwrap();
    let mut mismatches = 0;
    let mut total = 0;
    for ep in 0..100u64 {
        env.reset(1000 + ep, 77 + ep).unwrap();
        let mut policy = RandomPolicy::new(ep);
        let start = known_tiles(env.state().unwrap());
        let mut sum = 0;
        loop {
            let a = policy.act(env.observation(), env.allowed_actions());
            let r = env.step(a).unwrap();
            sum += base_reward(r.reward, r.info.time_advanced);
            if r.done {
                break;
            }
        }
        let delta = known_tiles(env.state().unwrap()) - start;
        total += delta;
        if sum != delta {
            mismatches += 1;
        }
    }
    Verdict::new(
        "scout-reward",
        mismatches == 0,
        format!("100 episodes, {total} tiles uncovered, {mismatches} mismatches"),
    )
}

fn bookkeeping() -> Verdict {
    let mut env = Env::new(TaskConfig::new(Task::Gold), tables()).unwrap();
    let mut gold_bad = 0;
    let mut gold_total = 0;
    for ep in 0..100u64 {
        env.reset(500 + ep, 9 + ep).unwrap();
        let mut policy = RandomPolicy::new(ep);
        let mut sum = 0;
        loop {
            let a = policy.act(env.observation(), env.allowed_actions());
            let r = env.step(a).unwrap();
            sum += base_reward(r.reward, r.info.time_advanced);
            if r.done {
                break;
            }
        }
        let gold = env.observation().blstats[bl::GOLD] as i64;
        gold_total += gold;
        if sum != gold {
            gold_bad += 1;
        }
    }

    let mut env = Env::new(TaskConfig::new(Task::Staircase), tables()).unwrap();
    let (mut stair_bad, mut successes, mut capped) = (0, 0, 0);
    for ep in 0..100u64 {
        env.reset(2000 + ep, 3 + ep).unwrap();
        let mut policy = RandomPolicy::new(ep);
        let last = loop {
            let a = policy.act(env.observation(), env.allowed_actions());
            let r = env.step(a).unwrap();
            if r.done {
                break r;
            }
        };
        let terminal = base_reward(last.reward, last.info.time_advanced);
        let cap_ok = match last.info.end {
            Some(EndReason::StepLimit) => {
                capped += 1;
                last.info.steps == 1000
            }
            _ => last.info.steps <= 1000,
        };
        successes += usize::from(last.info.success);
        if (terminal == 100) != last.info.success || !cap_ok {
            stair_bad += 1;
        }
    }
    // A search-only hero that cannot starve must run into the cap exactly.
    let mut cfg = TaskConfig::new(Task::Staircase);
    cfg.allowed_actions = vec![Action::Search];
    let mut env = Env::new(cfg, tables()).unwrap();
    env.reset(42, 43).unwrap();
    env.state_mut().unwrap().hero_mut().nutrition = 100_000;
    let mut steps = 0;
    let forced = loop {
        let r = env.step(0).unwrap();
        steps += 1;
        if r.done || steps > 1001 {
            break r;
        }
    };
    let forced_ok = forced.info.end == Some(EndReason::StepLimit) && forced.info.steps == 1000
        || forced.info.death.is_some();

    Verdict::new(
        "reward-bookkeeping",
        gold_bad == 0 && stair_bad == 0 && forced_ok,
        format!(
            "gold: {gold_bad}/100 mismatched ({gold_total} collected); staircase: {stair_bad}/100 bad, \
             {successes} successes, {capped} capped; forced cap end {:?} at {} steps",
            forced.info.end.map(|e| e.to_string()),
            forced.info.steps
        ),
    )
}

fn seed_pool() -> Verdict {
    let mut bad = 0;
    let mut cases = 0;
    let mut masters = ChaCha8Rng::seed_from_u64(0x9001);
    for _ in 0..50 {
        let master: u64 = masters.random();
        for size in [1usize, 10, 100, 1000] {
            cases += 1;
            let mut pool = SeedPool::new(size, master).unwrap();
            let train: HashSet<u64> = pool.train().iter().copied().collect();
            let test: HashSet<u64> = pool.test().iter().copied().collect();
            let mut ok = train.len() == size
                && test.len() == TEST_SEEDS
                && train.is_disjoint(&test);
            for _ in 0..(2 * size).max(20) {
                ok &= train.contains(&pool.next_train());
            }
            ok &= pool.eval_seeds(TEST_SEEDS + 20).iter().all(|s| !train.contains(s));
            if !ok {
                bad += 1;
            }
        }
    }
    Verdict::new(
        "seed-pool",
        bad == 0,
        format!("{cases} pools over 50 masters, {bad} violations"),
    )
}

fn mutated(rec: &EpisodeRecord, at: usize) -> EpisodeRecord {
    let mut m = rec.clone();
    let allowed = Action::parse_names(&rec.header.allowed_actions).unwrap();
    let cur = m.steps[at].action;
    m.steps[at].action = allowed.iter().map(|a| a.ascii()).find(|&a| a != cur).unwrap();
    m
}

fn replay() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (mut diverged, mut undetected, mut early) = (0, 0, 0);
    for ep in 0..100u64 {
        let task = Task::ALL[ep as usize % Task::ALL.len()];
        let mut cfg = TaskConfig::new(task);
        cfg.max_steps = cfg.max_steps.min(2000);
        let mut env = Env::new(cfg, tables()).unwrap();
        let mut policy = RandomPolicy::new(ep);
        let path = dir.path().join(format!("r{ep}.rec"));
        record_episode(&mut env, ActionSource::Policy(&mut policy), 300 + ep, ep, &path).unwrap();
        let rec = load_record(&path).unwrap();
        if !replay_verify(&rec, tables()).unwrap().ok() {
            diverged += 1;
        }
        let at = (ep as usize * 13) % rec.steps.len();
        match replay_verify(&mutated(&rec, at), tables()).unwrap().first_divergence {
            None => undetected += 1,
            Some(d) if d.step != 0 && d.step <= at => early += 1,
            Some(_) => {}
        }
    }
    Verdict::new(
        "replay-integrity",
        diverged == 0 && undetected == 0 && early == 0,
        format!(
            "100 episodes, {diverged} diverged; mutations: {undetected} undetected, {early} flagged before the mutated step"
        ),
    )
}

fn main() -> ExitCode {
    let mut verdicts = Vec::new();
    let mut run = |f: &dyn Fn() -> Vec<Verdict>| {
        for v in f() {
            let tag = match (v.pass, v.machine_limited) {
                (true, _) => "PASS",
                (false, true) => "FAIL [machine-limited]",
                (false, false) => "FAIL",
            };
            println!("{tag} {}: {}", v.name, v.detail);
            verdicts.push(v);
        }
    };
    run(&|| vec![determinism()]);
    run(&throughput);
    run(&|| vec![oracle()]);
    run(&|| vec![level_validity()]);
    run(&|| vec![scout()]);
    run(&|| vec![bookkeeping()]);
    run(&|| vec![seed_pool()]);
    run(&|| vec![replay()]);

    let passed = verdicts.iter().filter(|v| v.pass).count();
    let hard = verdicts.iter().filter(|v| !v.pass && !v.machine_limited).count();
    println!("acceptance: {passed}/{} passed", verdicts.len());
    if hard == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
