//! Episode records: a line-oriented text file that pins every determinism input.
//!
//! ```text
//! #delve-record v1
//! H {"game_seed":1,...}          header (JSON)
//! F 9f0c2a1b33d4e5f6             frame hash after reset
//! S 104 0 1 0b1c...              action ascii, reward, time advanced, frame hash
//! E {"score":0,...}              footer (JSON), written when the episode ends
//! ```
//!
//! Lines are flushed as they are written, so a crashed run leaves a loadable
//! prefix. Replay re-simulates from the header seeds and compares per-step
//! rewards and frame hashes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{action_table_hash, Action};
use crate::config::{sha256_hex, ConfigTables};
use crate::engine::{CharacterSpec, DeathCause};
use crate::env::{Env, Policy, StepResult, Task, TaskConfig};
use crate::error::{EnvError, RecordError};
use crate::observe::Observation;

pub const MAGIC: &str = "#delve-record v1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: u32,
    pub game_seed: u64,
    pub episode_seed: u64,
    pub character: String,
    pub task: Task,
    pub autopickup_gold: bool,
    pub max_steps: u32,
    pub max_depth: u32,
    pub allowed_actions: Vec<String>,
    pub action_table: String,
    pub tables: BTreeMap<String, String>,
}

impl RecordHeader {
    pub fn new(config: &TaskConfig, tables: &ConfigTables, game_seed: u64, episode_seed: u64) -> Self {
        RecordHeader {
            format: FORMAT_VERSION,
            game_seed,
            episode_seed,
            character: config.character.to_string(),
            task: config.task,
            autopickup_gold: config.autopickup_gold,
            max_steps: config.max_steps,
            max_depth: config.max_depth,
            allowed_actions: config.allowed_actions.iter().map(|a| a.name()).collect(),
            action_table: action_table_hash(),
            tables: tables
                .hashes
                .entries()
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn task_config(&self) -> Result<TaskConfig, RecordError> {
        let mut c = TaskConfig::new(self.task);
        c.character = self
            .character
            .parse::<CharacterSpec>()
            .map_err(EnvError::from)?;
        c.autopickup_gold = self.autopickup_gold;
        c.max_steps = self.max_steps;
        c.max_depth = self.max_depth;
        c.allowed_actions = Action::parse_names(&self.allowed_actions).map_err(EnvError::from)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEntry {
    pub action: u8,
    pub reward: f64,
    pub time_advanced: bool,
    pub frame_hash: u64,
}

impl StepEntry {
    fn line(&self) -> String {
        format!(
            "S {} {} {} {:016x}",
            self.action,
            self.reward,
            u8::from(self.time_advanced),
            self.frame_hash
        )
    }

    fn parse(line: &str, lineno: usize) -> Result<StepEntry, RecordError> {
        let corrupt = |reason: &str| RecordError::Corrupt {
            line: lineno,
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = line.split(' ').collect();
        let [_, action, reward, adv, hash] = parts[..] else {
            return Err(corrupt("step line needs 4 fields"));
        };
        let entry = StepEntry {
            action: action.parse().map_err(|_| corrupt("bad action"))?,
            reward: reward.parse().map_err(|_| corrupt("bad reward"))?,
            time_advanced: match adv {
                "0" => false,
                "1" => true,
                _ => return Err(corrupt("bad time flag")),
            },
            frame_hash: u64::from_str_radix(hash, 16).map_err(|_| corrupt("bad frame hash"))?,
        };
        // Only the canonical spelling is accepted, so every byte of a step line matters.
        if entry.line() != line {
            return Err(corrupt("non-canonical step line"));
        }
        Ok(entry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFooter {
    pub score: i64,
    pub depth: u32,
    pub deepest: u32,
    pub experience_level: i32,
    pub turn: u64,
    pub steps: u32,
    pub success: bool,
    pub death: Option<DeathCause>,
    pub end: String,
    pub episode_return: f64,
    /// SHA-256 over the step lines, newline-terminated.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub header: RecordHeader,
    pub initial_frame: u64,
    pub steps: Vec<StepEntry>,
    pub footer: Option<RecordFooter>,
}

impl EpisodeRecord {
    pub fn steps_checksum(&self) -> String {
        checksum(&self.steps)
    }

    /// Serializes the record in file form.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{MAGIC}\nH {}\nF {:016x}\n",
            serde_json::to_string(&self.header).expect("header serializes"),
            self.initial_frame
        );
        for st in &self.steps {
            s.push_str(&st.line());
            s.push('\n');
        }
        if let Some(f) = &self.footer {
            s.push_str(&format!("E {}\n", serde_json::to_string(f).expect("footer serializes")));
        }
        s
    }
}

fn checksum(steps: &[StepEntry]) -> String {
    let mut text = String::with_capacity(steps.len() * 32);
    for s in steps {
        text.push_str(&s.line());
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

/// Writes a record incrementally, flushing after every line.
pub struct Recorder {
    path: PathBuf,
    out: BufWriter<File>,
    steps: Vec<StepEntry>,
}

impl Recorder {
    pub fn create(path: &Path, header: &RecordHeader, initial_frame: u64) -> Result<Recorder, RecordError> {
        let file = File::create(path)?;
        let mut r = Recorder {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            steps: Vec::new(),
        };
        let head = format!(
            "{MAGIC}\nH {}\nF {:016x}\n",
            serde_json::to_string(header).expect("header serializes"),
            initial_frame
        );
        r.write_line(&head)?;
        Ok(r)
    }

    fn write_line(&mut self, text: &str) -> Result<(), RecordError> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|source| RecordError::Partial {
                path: self.path.clone(),
                steps_written: self.steps.len(),
                source,
            })
    }

    pub fn step(&mut self, entry: StepEntry) -> Result<(), RecordError> {
        let line = format!("{}\n", entry.line());
        self.write_line(&line)?;
        self.steps.push(entry);
        Ok(())
    }

    pub fn finish(mut self, mut footer: RecordFooter) -> Result<RecordFooter, RecordError> {
        footer.checksum = checksum(&self.steps);
        let line = format!("E {}\n", serde_json::to_string(&footer).expect("footer serializes"));
        self.write_line(&line)?;
        Ok(footer)
    }

    pub fn steps(&self) -> &[StepEntry] {
        &self.steps
    }
}

/// Where a recorded episode gets its actions.
pub enum ActionSource<'a> {
    Policy(&'a mut dyn Policy),
    /// Fixed action list; recording stops early if the list runs out.
    List(&'a [Action]),
    /// Asked before every step; `None` stops recording without a footer.
    Callback(&'a mut dyn FnMut(&Env) -> Option<Action>),
}

fn footer_for(env: &Env, r: &StepResult) -> RecordFooter {
    let st = env.state().expect("reset");
    RecordFooter {
        score: r.info.score,
        depth: r.info.depth,
        deepest: st.deepest(),
        experience_level: r.info.experience_level,
        turn: r.info.turn,
        steps: r.info.steps,
        success: r.info.success,
        death: r.info.death,
        end: r.info.end.map(|e| e.to_string()).unwrap_or_default(),
        episode_return: env.episode_return(),
        checksum: String::new(),
    }
}

/// Resets `env`, plays one episode and writes it to `path`.
pub fn record_episode(
    env: &mut Env,
    mut source: ActionSource<'_>,
    game_seed: u64,
    episode_seed: u64,
    path: &Path,
) -> Result<EpisodeRecord, RecordError> {
    env.reset(game_seed, episode_seed)?;
    if let ActionSource::Policy(p) = &mut source {
        p.reset(game_seed);
    }
    let header = RecordHeader::new(env.config(), env.tables(), game_seed, episode_seed);
    let initial_frame = env.observation().frame_hash();
    let mut rec = Recorder::create(path, &header, initial_frame)?;
    let mut footer = None;
    let mut i = 0;
    loop {
        let action = match &mut source {
            ActionSource::Policy(p) => {
                let idx = p.act(env.observation(), env.allowed_actions());
                env.allowed_actions()[idx]
            }
            ActionSource::List(list) => match list.get(i) {
                Some(a) => *a,
                None => break,
            },
            ActionSource::Callback(f) => match f(env) {
                Some(a) => a,
                None => break,
            },
        };
        i += 1;
        let r = env.step_action(action)?;
        rec.step(StepEntry {
            action: action.ascii(),
            reward: r.reward,
            time_advanced: r.info.time_advanced,
            frame_hash: env.observation().frame_hash(),
        })?;
        if r.done {
            footer = Some(footer_for(env, &r));
            break;
        }
    }
    let steps = rec.steps().to_vec();
    let footer = match footer {
        Some(f) => Some(rec.finish(f)?),
        None => None,
    };
    Ok(EpisodeRecord {
        header,
        initial_frame,
        steps,
        footer,
    })
}

/// Loads a record. A trailing line without a newline is dropped, so files cut
/// off mid-write load up to their last complete step.
pub fn load_record(path: &Path) -> Result<EpisodeRecord, RecordError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_record(&text)
}

pub fn parse_record(text: &str) -> Result<EpisodeRecord, RecordError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut lines = complete.lines().enumerate().map(|(i, l)| (i + 1, l));
    let corrupt = |line: usize, reason: &str| RecordError::Corrupt {
        line,
        reason: reason.to_string(),
    };
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, _)) => return Err(corrupt(n, "not a record file")),
        None => return Err(corrupt(1, "empty file")),
    }
    let header: RecordHeader = match lines.next() {
        Some((n, l)) => {
            let json = l.strip_prefix("H ").ok_or_else(|| corrupt(n, "expected header"))?;
            serde_json::from_str(json).map_err(|e| corrupt(n, &e.to_string()))?
        }
        None => return Err(corrupt(2, "missing header")),
    };
    if header.format != FORMAT_VERSION {
        return Err(corrupt(2, &format!("unsupported format {}", header.format)));
    }
    let initial_frame = match lines.next() {
        Some((n, l)) => {
            let h = l.strip_prefix("F ").ok_or_else(|| corrupt(n, "expected initial frame"))?;
            u64::from_str_radix(h, 16).map_err(|_| corrupt(n, "bad frame hash"))?
        }
        None => return Err(corrupt(3, "missing initial frame")),
    };
    let mut steps = Vec::new();
    let mut footer = None;
    for (n, l) in lines {
        if footer.is_some() {
            return Err(corrupt(n, "content after footer"));
        }
        if l.starts_with("S ") {
            steps.push(StepEntry::parse(l, n)?);
        } else if let Some(json) = l.strip_prefix("E ") {
            let f: RecordFooter = serde_json::from_str(json).map_err(|e| corrupt(n, &e.to_string()))?;
            footer = Some(f);
        } else {
            return Err(corrupt(n, "unknown line"));
        }
    }
    Ok(EpisodeRecord {
        header,
        initial_frame,
        steps,
        footer,
    })
}

/// Refuses records made with another action table or other config tables.
pub fn check_compatible(record: &EpisodeRecord, tables: &ConfigTables) -> Result<(), RecordError> {
    let current = action_table_hash();
    if record.header.action_table != current {
        return Err(RecordError::ActionTableMismatch {
            recorded: record.header.action_table.clone(),
            current,
        });
    }
    for (name, hash) in tables.hashes.entries() {
        let recorded = record.header.tables.get(name).cloned().unwrap_or_default();
        if recorded != hash {
            return Err(RecordError::StaleConfig {
                table: name.to_string(),
                recorded,
                current: hash.to_string(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum DivergenceKind {
    UnknownAction(u8),
    Rejected(String),
    Reward { recorded: f64, replayed: f64 },
    TimeFlag,
    Frame { recorded: u64, replayed: u64 },
    EndedEarly,
    NotEnded,
    Footer,
    Checksum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// 1-based step index; 0 refers to the initial frame or the footer.
    pub step: usize,
    pub kind: DivergenceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub steps_checked: usize,
    pub first_divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.first_divergence.is_none()
    }
}

fn new_replay_env(record: &EpisodeRecord, tables: Arc<ConfigTables>) -> Result<Env, RecordError> {
    check_compatible(record, &tables)?;
    let config = record.header.task_config()?;
    let mut env = Env::new(config, tables)?;
    env.reset(record.header.game_seed, record.header.episode_seed)?;
    Ok(env)
}

/// Re-simulates the record and reports the first mismatch.
pub fn replay_verify(record: &EpisodeRecord, tables: Arc<ConfigTables>) -> Result<VerifyReport, RecordError> {
    let mut env = new_replay_env(record, tables)?;
    let diverge = |step: usize, kind: DivergenceKind, checked: usize| VerifyReport {
        steps_checked: checked,
        first_divergence: Some(Divergence { step, kind }),
    };
    let frame = env.observation().frame_hash();
    if frame != record.initial_frame {
        return Ok(diverge(
            0,
            DivergenceKind::Frame {
                recorded: record.initial_frame,
                replayed: frame,
            },
            0,
        ));
    }
    let mut last = None;
    for (i, st) in record.steps.iter().enumerate() {
        let n = i + 1;
        if env.is_done() {
            return Ok(diverge(n, DivergenceKind::EndedEarly, i));
        }
        let Some(action) = Action::from_ascii(st.action) else {
            return Ok(diverge(n, DivergenceKind::UnknownAction(st.action), i));
        };
        let r = match env.step_action(action) {
            Ok(r) => r,
            Err(e) => return Ok(diverge(n, DivergenceKind::Rejected(e.to_string()), i)),
        };
        if r.reward != st.reward {
            return Ok(diverge(
                n,
                DivergenceKind::Reward {
                    recorded: st.reward,
                    replayed: r.reward,
                },
                n,
            ));
        }
        if r.info.time_advanced != st.time_advanced {
            return Ok(diverge(n, DivergenceKind::TimeFlag, n));
        }
        let h = env.observation().frame_hash();
        if h != st.frame_hash {
            return Ok(diverge(
                n,
                DivergenceKind::Frame {
                    recorded: st.frame_hash,
                    replayed: h,
                },
                n,
            ));
        }
        last = Some(r);
    }
    let checked = record.steps.len();
    if let Some(footer) = &record.footer {
        let Some(r) = last.filter(|r| r.done) else {
            return Ok(diverge(checked, DivergenceKind::NotEnded, checked));
        };
        let expected = RecordFooter {
            checksum: footer.checksum.clone(),
            ..footer_for(&env, &r)
        };
        if &expected != footer {
            return Ok(diverge(0, DivergenceKind::Footer, checked));
        }
        if footer.checksum != record.steps_checksum() {
            return Ok(diverge(0, DivergenceKind::Checksum, checked));
        }
    }
    Ok(VerifyReport {
        steps_checked: checked,
        first_divergence: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStyle {
    Plain,
    /// ANSI 16-color escapes.
    Ansi,
}

/// Writes one frame of chars (and colors, for [`FrameStyle::Ansi`]).
pub fn write_frame<W: Write>(obs: &Observation, style: FrameStyle, out: &mut W) -> std::io::Result<()> {
    let width = crate::dungeon::MAP_WIDTH;
    match style {
        FrameStyle::Plain => out.write_all(obs.ascii().as_bytes()),
        FrameStyle::Ansi => {
            let mut s = String::with_capacity(obs.chars.len() * 6);
            for (row_c, row_k) in obs.chars.chunks(width).zip(obs.colors.chunks(width)) {
                let mut cur = 255u8;
                for (&c, &k) in row_c.iter().zip(row_k) {
                    if k != cur {
                        let code = if k < 8 { 30 + k as u32 } else { 90 + (k as u32 - 8) };
                        s.push_str(&format!("\x1b[{code}m"));
                        cur = k;
                    }
                    s.push(c as char);
                }
                s.push_str("\x1b[0m\n");
            }
            out.write_all(s.as_bytes())
        }
    }
}

/// Replays the record, emitting the initial frame and one frame per step.
/// `speed` is in steps per second; `None` means no delay. Returns the frame count.
pub fn render_replay<W: Write>(
    record: &EpisodeRecord,
    tables: Arc<ConfigTables>,
    speed: Option<f64>,
    style: FrameStyle,
    out: &mut W,
) -> Result<usize, RecordError> {
    let delay = match speed {
        Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(1.0 / s)),
        Some(s) if s <= 0.0 || s.is_nan() => {
            return Err(EnvError::InvalidParameter(format!("speed must be positive, got {s}")).into())
        }
        _ => None,
    };
    let mut env = new_replay_env(record, tables)?;
    let mut frames = 0;
    let emit = |env: &Env, out: &mut W, step: usize| -> Result<(), RecordError> {
        writeln!(out, "--- step {step} ---")?;
        write_frame(env.observation(), style, out)?;
        writeln!(out, "{}", env.observation().message_text())?;
        out.flush()?;
        Ok(())
    };
    emit(&env, out, 0)?;
    frames += 1;
    for (i, st) in record.steps.iter().enumerate() {
        if let Some(d) = delay {
            std::thread::sleep(d);
        }
        let action = Action::from_ascii(st.action).ok_or_else(|| RecordError::Corrupt {
            line: i + 4,
            reason: format!("unknown action {}", st.action),
        })?;
        env.step_action(action)?;
        emit(&env, out, i + 1)?;
        frames += 1;
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub file: String,
    pub game_seed: u64,
    pub episode_seed: u64,
    pub task: String,
    pub character: String,
    pub steps: usize,
    pub complete: bool,
    pub score: Option<i64>,
    pub depth: Option<u32>,
    pub deepest: Option<u32>,
    pub experience_level: Option<i32>,
    pub turn: Option<u64>,
    pub success: Option<bool>,
    pub death: Option<String>,
    pub end: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsTable {
    pub episodes: Vec<EpisodeStats>,
    pub death_causes: BTreeMap<String, usize>,
    pub action_counts: BTreeMap<String, usize>,
    pub total_steps: usize,
    pub mean_score: f64,
    pub mean_depth: f64,
    pub mean_experience_level: f64,
    pub mean_time: f64,
}

impl StatsTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        for e in &self.episodes {
            wtr.serialize(e)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "episodes {}\nsteps {}\nmean score {:.2}\nmean dungeon level {:.2}\nmean exp level {:.2}\nmean time {:.1}\n",
            self.episodes.len(),
            self.total_steps,
            self.mean_score,
            self.mean_depth,
            self.mean_experience_level,
            self.mean_time
        );
        s.push_str("\ndeath causes\n");
        for (k, v) in &self.death_causes {
            s.push_str(&format!("  {k:<24} {v}\n"));
        }
        s.push_str("\nactions\n");
        for (k, v) in &self.action_counts {
            let frac = *v as f64 / self.total_steps.max(1) as f64;
            s.push_str(&format!("  {k:<24} {v:>8} {:>6.2}%\n", frac * 100.0));
        }
        s
    }
}

/// Aggregates terminal stats, death causes and action frequencies over record files.
pub fn extract_stats(paths: &[PathBuf]) -> Result<StatsTable, RecordError> {
    let records: Vec<(String, EpisodeRecord)> = paths
        .par_iter()
        .map(|p| load_record(p).map(|r| (p.display().to_string(), r)))
        .collect::<Result<_, _>>()?;
    Ok(stats_from_records(&records))
}

pub fn stats_from_records(records: &[(String, EpisodeRecord)]) -> StatsTable {
    let mut death_causes = BTreeMap::new();
    let mut action_counts = BTreeMap::new();
    let mut episodes = Vec::with_capacity(records.len());
    let mut total_steps = 0;
    for (file, r) in records {
        for st in &r.steps {
            let name = Action::from_ascii(st.action)
                .map(|a| a.name())
                .unwrap_or_else(|| format!("ascii-{}", st.action));
            *action_counts.entry(name).or_insert(0) += 1;
        }
        total_steps += r.steps.len();
        let f = r.footer.as_ref();
        if let Some(c) = f.and_then(|f| f.death) {
            *death_causes.entry(c.to_string()).or_insert(0) += 1;
        }
        episodes.push(EpisodeStats {
            file: file.clone(),
            game_seed: r.header.game_seed,
            episode_seed: r.header.episode_seed,
            task: r.header.task.to_string(),
            character: r.header.character.clone(),
            steps: r.steps.len(),
            complete: f.is_some(),
            score: f.map(|f| f.score),
            depth: f.map(|f| f.depth),
            deepest: f.map(|f| f.deepest),
            experience_level: f.map(|f| f.experience_level),
            turn: f.map(|f| f.turn),
            success: f.map(|f| f.success),
            death: f.and_then(|f| f.death).map(|d| d.to_string()),
            end: f.map(|f| f.end.clone()),
        });
    }
    let done: Vec<&RecordFooter> = records.iter().filter_map(|(_, r)| r.footer.as_ref()).collect();
    let mean = |g: &dyn Fn(&RecordFooter) -> f64| {
        if done.is_empty() {
            0.0
        } else {
            done.iter().map(|f| g(f)).sum::<f64>() / done.len() as f64
        }
    };
    StatsTable {
        mean_score: mean(&|f| f.score as f64),
        mean_depth: mean(&|f| f.deepest as f64),
        mean_experience_level: mean(&|f| f.experience_level as f64),
        mean_time: mean(&|f| f.turn as f64),
        episodes,
        death_causes,
        action_counts,
        total_steps,
    }
}

/// Reads just the header, for listing.
pub fn read_header(path: &Path) -> Result<RecordHeader, RecordError> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let magic = lines.next().transpose()?.unwrap_or_default();
    if magic != MAGIC {
        return Err(RecordError::Corrupt {
            line: 1,
            reason: "not a record file".into(),
        });
    }
    let head = lines.next().transpose()?.unwrap_or_default();
    let json = head.strip_prefix("H ").ok_or(RecordError::Corrupt {
        line: 2,
        reason: "expected header".into(),
    })?;
    serde_json::from_str(json).map_err(|e| RecordError::Corrupt {
        line: 2,
        reason: e.to_string(),
    })
}
