//! Throughput benchmark: uniform-random policy with auto-reset.

use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::config::ConfigTables;
use crate::env::{derive_episode_seed, Env, Policy, RandomPolicy, TaskConfig};
use crate::error::EnvError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub sps: f64,
    pub total_steps: u64,
    pub episodes: u64,
    pub duration_sec: f64,
    pub parallel_instances: usize,
    pub policy: String,
    pub task: String,
    /// Steps per instance, in instance order.
    pub per_instance: Vec<u64>,
}

impl BenchResult {
    /// One table row: `task instances sps steps episodes seconds`.
    pub fn row(&self) -> String {
        format!(
            "{:<10} {:>9} {:>12} {:>12} {:>9} {:>8.2}",
            self.task,
            self.parallel_instances,
            format_sps(self.sps),
            self.total_steps,
            self.episodes,
            self.duration_sec
        )
    }

    pub fn header() -> String {
        format!(
            "{:<10} {:>9} {:>12} {:>12} {:>9} {:>8}",
            "task", "instances", "sps", "steps", "episodes", "seconds"
        )
    }
}

fn format_sps(sps: f64) -> String {
    if sps >= 1000.0 {
        format!("{:.1}K", sps / 1000.0)
    } else {
        format!("{sps:.0}")
    }
}

struct WorkerReport {
    index: usize,
    steps: u64,
    episodes: u64,
}

fn worker(
    index: usize,
    config: TaskConfig,
    tables: Arc<ConfigTables>,
    deadline: Instant,
    seed: u64,
) -> Result<WorkerReport, EnvError> {
    let mut env = Env::new(config, tables)?;
    let mut policy = RandomPolicy::new(seed);
    let mut game_seed = seed;
    env.reset(game_seed, derive_episode_seed(game_seed))?;
    let (mut steps, mut episodes) = (0u64, 0u64);
    loop {
        // Check the clock every 64 steps to keep it off the hot path.
        for _ in 0..64 {
            let a = policy.act(env.observation(), env.allowed_actions());
            let r = env.step(a)?;
            steps += 1;
            if r.done {
                episodes += 1;
                game_seed = game_seed.wrapping_add(1);
                env.reset(game_seed, derive_episode_seed(game_seed))?;
            }
        }
        if Instant::now() >= deadline {
            return Ok(WorkerReport {
                index,
                steps,
                episodes,
            });
        }
    }
}

/// Runs `instances` environments on their own threads for `duration`.
pub fn cmd_bench(
    config: &TaskConfig,
    tables: Arc<ConfigTables>,
    duration: Duration,
    instances: usize,
    seed: u64,
) -> Result<BenchResult, EnvError> {
    if duration.is_zero() {
        return Err(EnvError::InvalidParameter("duration must be positive".into()));
    }
    if instances == 0 {
        return Err(EnvError::InvalidParameter("instances must be positive".into()));
    }
    let start = Instant::now();
    let deadline = start + duration;
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for i in 0..instances {
            let tx = tx.clone();
            let cfg = config.clone();
            let tables = tables.clone();
            let seed = seed.wrapping_add((i as u64) << 32);
            s.spawn(move || {
                let _ = tx.send(worker(i, cfg, tables, deadline, seed));
            });
        }
    });
    drop(tx);
    let elapsed = start.elapsed().as_secs_f64();
    let mut per_instance = vec![0; instances];
    let mut episodes = 0;
    for r in rx {
        let r = r?;
        per_instance[r.index] = r.steps;
        episodes += r.episodes;
    }
    let total_steps: u64 = per_instance.iter().sum();
    Ok(BenchResult {
        sps: total_steps as f64 / elapsed,
        total_steps,
        episodes,
        duration_sec: elapsed,
        parallel_instances: instances,
        policy: "uniform-random".into(),
        task: config.task.to_string(),
        per_instance,
    })
}
