use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use delve::bench::{cmd_bench, BenchResult};
use delve::config::ConfigTables;
use delve::dungeon::{generate_level, validate_level, GenConfig};
use delve::env::{
    derive_episode_seed, policy_by_name, run_episode, Env, EnvFile, EpisodeSummary, EvalReport,
    SeedPool, Task, TaskConfig,
};
use delve::error::{ConfigError, EnvError};
use delve::recording::{
    extract_stats, load_record, record_episode, render_replay, replay_verify, ActionSource,
    EpisodeRecord, FrameStyle,
};

mod play;

/// Procedurally generated dungeon environment.
///
/// Config tables load from the directory in DELVE_CONFIG_DIR when set.
/// Exit codes: 0 ok, 1 argument error, 2 data error.
#[derive(Parser, Debug)]
#[command(name = "delve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play in the terminal and record the episode.
    Play(PlayArgs),
    /// Measure steps per second under a uniform-random policy.
    Bench(BenchArgs),
    /// Evaluate a built-in policy over held-out seeds.
    Eval(EvalArgs),
    /// Re-simulate a record, printing frames or just verifying it.
    Replay(ReplayArgs),
    /// Summarize records into one CSV.
    Stats(StatsArgs),
    /// Print a generated level map.
    Gen(GenArgs),
}

#[derive(Args, Debug, Clone)]
struct TaskArgs {
    /// Task name (staircase, pet, eat, gold, scout, score, oracle).
    #[arg(long)]
    task: Option<String>,
    /// Environment file (TOML) with task, character, max_steps, allowed_actions and seeds.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Character as role-race-alignment-gender.
    #[arg(long)]
    character: Option<String>,
    #[arg(long)]
    max_steps: Option<u32>,
}

#[derive(Args, Debug)]
struct PlayArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where to write the record.
    #[arg(long, default_value = "play.rec")]
    record: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Seconds to run.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 1)]
    instances: usize,
    #[arg(long, default_value = "score")]
    task: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of a table row.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// random, greedy-descend or scripted:<action,...>
    #[arg(long, default_value = "random")]
    policy: String,
    /// Number of episodes.
    #[arg(short = 'n', long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Training-pool size the held-out seeds are kept apart from.
    #[arg(long)]
    train_size: Option<usize>,
    /// Per-episode CSV.
    #[arg(long, default_value = "eval.csv")]
    out: PathBuf,
    /// Also record every episode into this directory.
    #[arg(long)]
    record_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    file: PathBuf,
    /// Steps per second; omit for no delay.
    #[arg(long)]
    speed: Option<f64>,
    /// Only check the record, printing no frames.
    #[arg(long)]
    verify: bool,
    /// Color frames with ANSI escapes.
    #[arg(long)]
    ansi: bool,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Record files, directories or glob patterns.
    #[arg(required = true)]
    inputs: Vec<String>,
    /// CSV destination; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// Print the summary to stderr.
    #[arg(long)]
    summary: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    depth: u32,
    /// Also print the validation report.
    #[arg(long)]
    validate: bool,
}

/// A bad flag or flag combination.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        let config_usage = |c: &ConfigError| {
            matches!(
                c,
                ConfigError::UnknownTask(_)
                    | ConfigError::UnknownCharacter(_)
                    | ConfigError::MalformedCharacter(_)
                    | ConfigError::UnknownAction(_)
            )
        };
        if let Some(c) = cause.downcast_ref::<ConfigError>() {
            return if config_usage(c) { 1 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<EnvError>() {
            return match e {
                EnvError::InvalidParameter(_) => 1,
                EnvError::Config(c) if config_usage(c) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn tables() -> Result<Arc<ConfigTables>> {
    ConfigTables::from_env().context("loading config tables")
}

fn task_config(args: &TaskArgs, default: Task) -> Result<(TaskConfig, Option<EnvFile>)> {
    let file = match &args.env {
        Some(p) => Some(EnvFile::load(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut cfg = match &file {
        Some(f) => f.task_config()?,
        None => TaskConfig::new(default),
    };
    if let Some(t) = &args.task {
        let task: Task = t.parse()?;
        if file.is_some() && task != cfg.task {
            return Err(usage(format!("--task {t} conflicts with the env file task {}", cfg.task)));
        }
        if file.is_none() {
            cfg = TaskConfig::new(task);
        }
    }
    if let Some(c) = &args.character {
        cfg.character = c.parse()?;
    }
    if let Some(n) = args.max_steps {
        cfg.max_steps = n;
    }
    cfg.validate()?;
    Ok((cfg, file))
}

fn cmd_play(args: PlayArgs) -> Result<()> {
    let (cfg, _) = task_config(&args.task, Task::Score)?;
    play::run(cfg, tables()?, args.seed, &args.record)
}

fn bench(args: BenchArgs) -> Result<()> {
    if !(args.duration > 0.0 && args.duration.is_finite()) {
        return Err(usage("--duration must be a positive number of seconds"));
    }
    if args.instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    let cfg = TaskConfig::new(args.task.parse()?);
    let r: BenchResult = cmd_bench(
        &cfg,
        tables()?,
        Duration::from_secs_f64(args.duration),
        args.instances,
        args.seed,
    )?;
    if args.json {
        println!("{}", serde_json::to_string(&r)?);
    } else {
        println!("{}", BenchResult::header());
        println!("{}", r.row());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    if args.episodes == 0 {
        return Err(usage("-n must be at least 1"));
    }
    let (cfg, file) = task_config(&args.task, Task::Score)?;
    let seeds_cfg = file.as_ref().map(|f| f.seeds).unwrap_or_default();
    let master = args.master_seed.unwrap_or(seeds_cfg.master);
    let train_size = args.train_size.unwrap_or(seeds_cfg.train_size);
    let pool = SeedPool::new(train_size, master)?;
    let seeds = pool.eval_seeds(args.episodes);
    let tables = tables()?;
    let mut policy = policy_by_name(&args.policy, master).map_err(|e| usage(e.to_string()))?;
    if let Some(dir) = &args.record_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut env = Env::new(cfg.clone(), tables)?;
    let mut episodes = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let es = derive_episode_seed(s);
        let summary = match &args.record_dir {
            Some(dir) => {
                let path = dir.join(format!("{s:016x}.rec"));
                summary_of(&record_episode(&mut env, ActionSource::Policy(policy.as_mut()), s, es, &path)?)
            }
            None => run_episode(&mut env, policy.as_mut(), s, es)?,
        };
        episodes.push(summary);
    }
    let report = EvalReport::from_episodes(&cfg, policy.name(), episodes)?;
    let out = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    report.write_csv(BufWriter::new(out))?;
    print!("{}", report.table());
    println!("{:<18}  {train_size} (master seed {master})", "training seeds");
    println!("{:<18}  {}", "csv", args.out.display());
    Ok(())
}

fn summary_of(rec: &EpisodeRecord) -> EpisodeSummary {
    let f = rec.footer.as_ref().expect("policy episodes run to the end");
    EpisodeSummary {
        game_seed: rec.header.game_seed,
        episode_seed: rec.header.episode_seed,
        score: f.score,
        depth: f.depth,
        deepest: f.deepest,
        experience_level: f.experience_level,
        turn: f.turn,
        steps: f.steps,
        success: f.success,
        end: f.end.clone(),
        episode_return: f.episode_return,
    }
}

fn replay(args: ReplayArgs) -> Result<()> {
    let record = load_record(&args.file).with_context(|| format!("loading {}", args.file.display()))?;
    let tables = tables()?;
    if args.verify {
        let report = replay_verify(&record, tables)?;
        match &report.first_divergence {
            None => {
                println!("ok: {} steps verified", report.steps_checked);
                Ok(())
            }
            Some(d) => bail!(
                "diverged at step {} ({:?}) after {} matching steps",
                d.step,
                d.kind,
                report.steps_checked
            ),
        }
    } else {
        let style = if args.ansi { FrameStyle::Ansi } else { FrameStyle::Plain };
        let stdout = io::stdout();
        let mut out = stdout.lock();
        let frames = render_replay(&record, tables, args.speed, style, &mut out)?;
        writeln!(out, "{frames} frames")?;
        Ok(())
    }
}

fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        let p = Path::new(input);
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "rec"))
                .collect();
            found.sort();
            paths.extend(found);
        } else if p.exists() {
            paths.push(p.to_path_buf());
        } else {
            let matches: Vec<PathBuf> = glob::glob(input)
                .map_err(|e| usage(format!("bad pattern {input:?}: {e}")))?
                .filter_map(|r| r.ok())
                .collect();
            if matches.is_empty() {
                bail!("no records match {input:?}");
            }
            paths.extend(matches);
        }
    }
    Ok(paths)
}

fn stats(args: StatsArgs) -> Result<()> {
    let paths = expand_inputs(&args.inputs)?;
    let table = extract_stats(&paths)?;
    if args.out == "-" {
        table.write_csv(io::stdout().lock())?;
    } else {
        let f = File::create(&args.out).with_context(|| format!("creating {}", args.out))?;
        table.write_csv(BufWriter::new(f))?;
    }
    if args.summary {
        eprint!("{}", table.summary());
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let cfg = GenConfig::default();
    if args.depth == 0 || args.depth > cfg.max_depth {
        return Err(usage(format!("--depth must be in 1..={}", cfg.max_depth)));
    }
    let bp = generate_level(args.seed, args.depth, &cfg)?;
    print!("{}", bp.to_ascii());
    if args.validate {
        let report = validate_level(&bp, cfg.max_depth);
        println!("valid: {}", report.is_valid());
        for v in &report.violations {
            println!("  {v:?}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Play(a) => cmd_play(a),
        Command::Bench(a) => bench(a),
        Command::Eval(a) => eval(a),
        Command::Replay(a) => replay(a),
        Command::Stats(a) => stats(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
