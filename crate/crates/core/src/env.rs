//! Episode lifecycle, task rewards, seeding and evaluation.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{Action, Direction};
use crate::config::ConfigTables;
use crate::dungeon::{GenConfig, Pos};
use crate::engine::{CharacterSpec, DeathCause, Event, GameOptions, GameState};
use crate::error::{ConfigError, EngineError, EnvError};
use crate::glyph;
use crate::observe::{self, Observation};

/// Reward added when an action did not advance the game clock.
pub const TIME_PENALTY: f64 = -0.001;
pub const TEST_SEEDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Staircase,
    Pet,
    Eat,
    Gold,
    Scout,
    Score,
    Oracle,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Staircase,
        Task::Pet,
        Task::Eat,
        Task::Gold,
        Task::Scout,
        Task::Score,
        Task::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Staircase => "staircase",
            Task::Pet => "pet",
            Task::Eat => "eat",
            Task::Gold => "gold",
            Task::Scout => "scout",
            Task::Score => "score",
            Task::Oracle => "oracle",
        }
    }

    /// Tasks that end on success and report a success rate.
    pub fn has_success(self) -> bool {
        matches!(self, Task::Staircase | Task::Pet | Task::Oracle)
    }

    pub fn default_max_steps(self) -> u32 {
        match self {
            Task::Staircase | Task::Pet => 1000,
            _ => 10_000,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| ConfigError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub task: Task,
    pub max_steps: u32,
    pub allowed_actions: Vec<Action>,
    pub autopickup_gold: bool,
    pub character: CharacterSpec,
    pub time_penalty: f64,
    pub max_depth: u32,
}

impl TaskConfig {
    pub fn new(task: Task) -> Self {
        TaskConfig {
            task,
            max_steps: task.default_max_steps(),
            allowed_actions: Action::default_set(),
            autopickup_gold: task == Task::Gold,
            character: CharacterSpec::default(),
            time_penalty: TIME_PENALTY,
            max_depth: crate::dungeon::DEFAULT_MAX_DEPTH,
        }
    }

    pub fn options(&self) -> GameOptions {
        GameOptions {
            autopickup_gold: self.autopickup_gold,
        }
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            max_depth: self.max_depth,
            ..GenConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid("max_steps must be positive".into()));
        }
        if self.allowed_actions.is_empty() {
            return Err(ConfigError::Invalid("allowed action set is empty".into()));
        }
        if self.max_depth < 2 {
            return Err(ConfigError::Invalid("max_depth must be at least 2".into()));
        }
        if self.autopickup_gold != (self.task == Task::Gold) {
            return Err(ConfigError::Invalid(
                "autopickup_gold is on for the gold task and off otherwise".into(),
            ));
        }
        Ok(())
    }
}

/// Environment config file contents.
///
/// ```toml
/// task = "staircase"
/// character = "mon-hum-neu-mal"
/// max_steps = 1000
/// allowed_actions = ["movement", "search", "kick", "eat"]
///
/// [seeds]
/// master = 7
/// train_size = 1000
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    pub task: String,
    #[serde(default)]
    pub character: Option<String>,
    #[serde(default)]
    pub max_steps: Option<u32>,
    #[serde(default)]
    pub allowed_actions: Option<Vec<String>>,
    #[serde(default)]
    pub max_depth: Option<u32>,
    #[serde(default)]
    pub seeds: SeedSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSettings {
    #[serde(default)]
    pub master: u64,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
}

fn default_train_size() -> usize {
    1000
}

impl Default for SeedSettings {
    fn default() -> Self {
        SeedSettings {
            master: 0,
            train_size: default_train_size(),
        }
    }
}

impl EnvFile {
    pub fn parse(text: &str) -> Result<EnvFile, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            what: "environment config".into(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<EnvFile, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        EnvFile::parse(&text)
    }

    pub fn task_config(&self) -> Result<TaskConfig, ConfigError> {
        let mut c = TaskConfig::new(self.task.parse()?);
        if let Some(ch) = &self.character {
            c.character = ch.parse()?;
        }
        if let Some(n) = self.max_steps {
            c.max_steps = n;
        }
        if let Some(names) = &self.allowed_actions {
            c.allowed_actions = Action::parse_names(names)?;
        }
        if let Some(d) = self.max_depth {
            c.max_depth = d;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Scalars before and after one agent step, from which every task reward is computed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transition {
    pub prev_score: i64,
    pub next_score: i64,
    pub prev_nutrition: i32,
    pub next_nutrition: i32,
    pub prev_gold: u32,
    pub next_gold: u32,
    pub prev_depth: u32,
    pub next_depth: u32,
    pub newly_uncovered_tiles: usize,
    pub events: Vec<Event>,
    pub reached_staircase: bool,
    /// The pet came down the stairs with the hero this step.
    pub pet_adjacent: bool,
    pub reached_oracle: bool,
    pub time_advanced: bool,
}

impl Transition {
    pub fn gold_collected(&self) -> u32 {
        self.events
            .iter()
            .map(|e| match e {
                Event::GoldCollected(n) => *n,
                _ => 0,
            })
            .sum()
    }

    pub fn nutrition_eaten(&self) -> i32 {
        self.events
            .iter()
            .map(|e| match e {
                Event::Ate { nutrition } => *nutrition,
                _ => 0,
            })
            .sum()
    }
}

/// Task reward without the time penalty.
pub fn task_reward(task: Task, t: &Transition) -> f64 {
    match task {
        Task::Staircase if t.reached_staircase => 100.0,
        Task::Pet if t.reached_staircase && t.pet_adjacent => 100.0,
        Task::Eat => t.nutrition_eaten().max(0) as f64,
        Task::Gold => t.gold_collected() as f64,
        Task::Scout => t.newly_uncovered_tiles as f64,
        Task::Score => (t.next_score - t.prev_score).max(0) as f64,
        Task::Oracle if t.reached_oracle => 1000.0,
        _ => 0.0,
    }
}

pub fn task_succeeded(task: Task, t: &Transition) -> bool {
    match task {
        Task::Staircase => t.reached_staircase,
        Task::Pet => t.reached_staircase && t.pet_adjacent,
        Task::Oracle => t.reached_oracle,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Success,
    Death(DeathCause),
    StepLimit,
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndReason::Success => f.write_str("success"),
            EndReason::Death(c) => write!(f, "death:{c}"),
            EndReason::StepLimit => f.write_str("step_limit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub score: i64,
    pub depth: u32,
    pub experience_level: i32,
    pub turn: u64,
    pub steps: u32,
    pub time_advanced: bool,
    pub death: Option<DeathCause>,
    pub success: bool,
    pub end: Option<EndReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub struct Env {
    config: TaskConfig,
    tables: Arc<ConfigTables>,
    state: Option<GameState>,
    obs: Observation,
    steps: u32,
    done: bool,
    episode_return: f64,
    last: Transition,
    seeds: (u64, u64),
}

impl Env {
    pub fn new(config: TaskConfig, tables: Arc<ConfigTables>) -> Result<Env, EnvError> {
        config.validate()?;
        if tables.characters.role(&config.character.role).is_none() {
            return Err(ConfigError::UnknownCharacter(config.character.to_string()).into());
        }
        Ok(Env {
            config,
            tables,
            state: None,
            obs: Observation::new(),
            steps: 0,
            done: false,
            episode_return: 0.0,
            last: Transition::default(),
            seeds: (0, 0),
        })
    }

    pub fn with_builtin(config: TaskConfig) -> Result<Env, EnvError> {
        Env::new(config, ConfigTables::builtin())
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn tables(&self) -> &Arc<ConfigTables> {
        &self.tables
    }

    pub fn allowed_actions(&self) -> &[Action] {
        &self.config.allowed_actions
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn state(&self) -> Option<&GameState> {
        self.state.as_ref()
    }

    #[doc(hidden)]
    pub fn state_mut(&mut self) -> Option<&mut GameState> {
        self.state.as_mut()
    }

    /// Re-renders after the state was edited through [`Env::state_mut`].
    #[doc(hidden)]
    pub fn rerender(&mut self) {
        if let Some(s) = &self.state {
            observe::render_into(s, &mut self.obs);
        }
    }

    pub fn last_transition(&self) -> &Transition {
        &self.last
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    pub fn seeds(&self) -> (u64, u64) {
        self.seeds
    }

    pub fn reset(&mut self, game_seed: u64, episode_seed: u64) -> Result<&Observation, EnvError> {
        let state = GameState::new(
            self.tables.clone(),
            self.config.gen_config(),
            self.config.character.clone(),
            self.config.options(),
            game_seed,
            episode_seed,
        )?;
        observe::render_into(&state, &mut self.obs);
        self.state = Some(state);
        self.steps = 0;
        self.done = false;
        self.episode_return = 0.0;
        self.last = Transition::default();
        self.seeds = (game_seed, episode_seed);
        Ok(&self.obs)
    }

    /// Steps with an index into the allowed action list.
    pub fn step(&mut self, index: usize) -> Result<StepResult, EnvError> {
        let action = *self
            .config
            .allowed_actions
            .get(index)
            .ok_or(EnvError::ActionIndex {
                index,
                len: self.config.allowed_actions.len(),
            })?;
        self.step_action(action)
    }

    pub fn step_action(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if !self.config.allowed_actions.contains(&action) {
            return Err(EngineError::IllegalAction(action.ascii()).into());
        }
        let state = self.state.as_mut().ok_or(EnvError::NotReset)?;
        if self.done {
            return Err(EngineError::EpisodeOver.into());
        }
        let prev_score = state.score();
        let prev_nutrition = state.hero().nutrition;
        let prev_gold = state.hero().gold;
        let prev_depth = state.depth();
        let prev_seen = state.seen_tile_total();

        let outcome = state.apply_action(action)?;

        let reached_staircase = outcome
            .events
            .iter()
            .any(|e| matches!(e, Event::Descended { .. }));
        let arrived_with_pet = outcome.events.iter().any(|e| {
            matches!(
                e,
                Event::Descended {
                    with_pet: true,
                    ..
                }
            )
        });
        let t = Transition {
            prev_score,
            next_score: state.score(),
            prev_nutrition,
            next_nutrition: state.hero().nutrition,
            prev_gold,
            next_gold: state.hero().gold,
            prev_depth,
            next_depth: state.depth(),
            newly_uncovered_tiles: state.seen_tile_total().saturating_sub(prev_seen),
            reached_staircase,
            pet_adjacent: arrived_with_pet,
            reached_oracle: state.next_to_oracle(),
            time_advanced: outcome.time_advanced,
            events: outcome.events,
        };
        let mut reward = task_reward(self.config.task, &t);
        if !t.time_advanced {
            reward += self.config.time_penalty;
        }
        self.steps += 1;
        let success = task_succeeded(self.config.task, &t);
        let death = state.death();
        let end = if success {
            Some(EndReason::Success)
        } else if let Some(c) = death {
            Some(EndReason::Death(c))
        } else if self.steps >= self.config.max_steps {
            Some(EndReason::StepLimit)
        } else {
            None
        };
        self.done = end.is_some();
        self.episode_return += reward;
        observe::render_into(state, &mut self.obs);
        let info = StepInfo {
            score: state.score(),
            depth: state.depth(),
            experience_level: state.hero().experience_level,
            turn: state.turn(),
            steps: self.steps,
            time_advanced: t.time_advanced,
            death,
            success,
            end,
        };
        self.last = t;
        Ok(StepResult {
            reward,
            done: self.done,
            info,
        })
    }
}

/// Stream-splitting mix used to derive an episode seed from a game seed.
pub fn derive_episode_seed(game_seed: u64) -> u64 {
    let mut z = game_seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Disjoint training and held-out test seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedPool {
    train: Vec<u64>,
    test: Vec<u64>,
    master_seed: u64,
    cursor: usize,
}

impl SeedPool {
    pub fn new(train_size: usize, master_seed: u64) -> Result<SeedPool, EnvError> {
        if train_size == 0 {
            return Err(EnvError::InvalidParameter("train_size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let mut used = std::collections::HashSet::with_capacity(train_size + TEST_SEEDS);
        let mut draw = |n: usize| -> Vec<u64> {
            let mut v = Vec::with_capacity(n);
            while v.len() < n {
                let s: u64 = rng.random();
                if used.insert(s) {
                    v.push(s);
                }
            }
            v
        };
        let test = draw(TEST_SEEDS);
        let train = draw(train_size);
        Ok(SeedPool {
            train,
            test,
            master_seed,
            cursor: 0,
        })
    }

    pub fn train(&self) -> &[u64] {
        &self.train
    }

    pub fn test(&self) -> &[u64] {
        &self.test
    }

    /// Next training seed, cycling through the training set.
    pub fn next_train(&mut self) -> u64 {
        let s = self.train[self.cursor % self.train.len()];
        self.cursor += 1;
        s
    }

    /// `n` seeds never used for training: the test set first, then fresh draws.
    pub fn eval_seeds(&self, n: usize) -> Vec<u64> {
        let mut out: Vec<u64> = self.test.iter().copied().take(n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed ^ 0x5eed_e7a1);
        while out.len() < n {
            let s: u64 = rng.random();
            if !self.train.contains(&s) && !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}

/// Chooses an index into the allowed action list.
pub trait Policy {
    fn reset(&mut self, _game_seed: u64) {}
    fn act(&mut self, obs: &Observation, allowed: &[Action]) -> usize;
    fn name(&self) -> String;
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &Observation, allowed: &[Action]) -> usize {
        self.rng.random_range(0..allowed.len())
    }

    fn name(&self) -> String {
        "random".into()
    }
}

/// Repeats a fixed action sequence; actions missing from the allowed set map to index 0.
pub struct ScriptedPolicy {
    script: Vec<Action>,
    pos: usize,
}

impl ScriptedPolicy {
    pub fn new(script: Vec<Action>) -> Self {
        assert!(!script.is_empty(), "script must not be empty");
        ScriptedPolicy { script, pos: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn reset(&mut self, _game_seed: u64) {
        self.pos = 0;
    }

    fn act(&mut self, _obs: &Observation, allowed: &[Action]) -> usize {
        let a = self.script[self.pos % self.script.len()];
        self.pos += 1;
        allowed.iter().position(|x| *x == a).unwrap_or(0)
    }

    fn name(&self) -> String {
        let names: Vec<String> = self.script.iter().map(|a| a.name()).collect();
        format!("scripted({})", names.join(","))
    }
}

/// Walks to a visible down staircase by breadth-first search, or toward the
/// nearest unexplored frontier, searching when stuck.
pub struct GreedyDescendPolicy {
    rng: ChaCha8Rng,
    stairs: Option<Pos>,
}

impl GreedyDescendPolicy {
    pub fn new(seed: u64) -> Self {
        GreedyDescendPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
            stairs: None,
        }
    }

    fn passable(g: i16) -> bool {
        let g = glyph::GlyphId(g as u16);
        if g == glyph::UNEXPLORED || g == glyph::STONE || g == glyph::BOULDER || g == glyph::TRAP {
            return false;
        }
        match glyph::glyph_info(g) {
            Ok(info) => !info.entity_kind.contains("wall") && info.glyph_class != glyph::GlyphClass::Monster,
            Err(_) => false,
        }
    }

    fn is_door(g: i16) -> bool {
        let g = glyph::GlyphId(g as u16);
        g == glyph::DOOR_CLOSED || g == glyph::DOOR_OPEN_IN_HORIZONTAL_WALL || g == glyph::DOOR_OPEN_IN_VERTICAL_WALL
    }

    /// First step of a shortest path from `start` to any tile satisfying `goal`.
    fn bfs(glyphs: &[i16], start: Pos, goal: impl Fn(Pos) -> bool) -> Option<Direction> {
        let mut first: Vec<Option<Direction>> = vec![None; glyphs.len()];
        let mut seen = vec![false; glyphs.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[start.index()] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            if p != start && goal(p) {
                return first[p.index()];
            }
            for d in Direction::ALL {
                let (dx, dy) = d.delta();
                let q = p.offset(dx, dy);
                if !q.in_bounds() || seen[q.index()] {
                    continue;
                }
                let gq = glyphs[q.index()];
                if !Self::passable(gq) {
                    continue;
                }
                if d.is_diagonal() && (Self::is_door(gq) || Self::is_door(glyphs[p.index()])) {
                    continue;
                }
                seen[q.index()] = true;
                first[q.index()] = if p == start { Some(d) } else { first[p.index()] };
                queue.push_back(q);
            }
        }
        None
    }
}

impl Policy for GreedyDescendPolicy {
    fn reset(&mut self, _game_seed: u64) {
        self.stairs = None;
    }

    fn act(&mut self, obs: &Observation, allowed: &[Action]) -> usize {
        let hero = Pos::new(obs.blstats[observe::bl::X], obs.blstats[observe::bl::Y]);
        let depth_changed = self.stairs.is_some_and(|s| !s.in_bounds());
        if depth_changed {
            self.stairs = None;
        }
        if let Some(i) = obs.glyphs.iter().position(|&g| g == glyph::STAIRCASE_DOWN.0 as i16) {
            self.stairs = Some(Pos::from_index(i));
        }
        let index_of = |a: Action| allowed.iter().position(|x| *x == a);
        if self.stairs == Some(hero) {
            self.stairs = None;
            if let Some(i) = index_of(Action::Down) {
                return i;
            }
        }
        let step = match self.stairs {
            Some(s) => Self::bfs(&obs.glyphs, hero, |p| p == s),
            None => None,
        }
        .or_else(|| {
            let glyphs = &obs.glyphs;
            Self::bfs(glyphs, hero, |p| {
                p.neighbors8()
                    .any(|q| glyphs[q.index()] == glyph::UNEXPLORED.0 as i16)
                    && Self::passable(glyphs[p.index()])
            })
        });
        if let Some(i) = step.and_then(|d| index_of(Action::Move(d))) {
            return i;
        }
        if self.rng.random_bool(0.7) {
            if let Some(i) = index_of(Action::Search) {
                return i;
            }
        }
        self.rng.random_range(0..allowed.len())
    }

    fn name(&self) -> String {
        "greedy-descend".into()
    }
}

/// Builds a built-in policy by name: `random`, `greedy-descend` or `scripted:<action>,...`.
pub fn policy_by_name(name: &str, seed: u64) -> Result<Box<dyn Policy + Send>, ConfigError> {
    match name {
        "random" => Ok(Box::new(RandomPolicy::new(seed))),
        "greedy-descend" | "greedy" => Ok(Box::new(GreedyDescendPolicy::new(seed))),
        other => match other.strip_prefix("scripted:") {
            Some(list) => {
                let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
                Ok(Box::new(ScriptedPolicy::new(Action::parse_names(&names)?)))
            }
            None => Err(ConfigError::Invalid(format!("unknown policy {other:?}"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub game_seed: u64,
    pub episode_seed: u64,
    pub score: i64,
    pub depth: u32,
    pub deepest: u32,
    pub experience_level: i32,
    pub turn: u64,
    pub steps: u32,
    pub success: bool,
    pub end: String,
    pub episode_return: f64,
}

/// Runs one episode to completion, returning the summary.
pub fn run_episode(
    env: &mut Env,
    policy: &mut dyn Policy,
    game_seed: u64,
    episode_seed: u64,
) -> Result<EpisodeSummary, EnvError> {
    env.reset(game_seed, episode_seed)?;
    policy.reset(game_seed);
    loop {
        let a = policy.act(env.observation(), env.allowed_actions());
        let r = env.step(a)?;
        if r.done {
            let st = env.state().expect("reset");
            return Ok(EpisodeSummary {
                game_seed,
                episode_seed,
                score: r.info.score,
                depth: r.info.depth,
                deepest: st.deepest(),
                experience_level: r.info.experience_level,
                turn: r.info.turn,
                steps: r.info.steps,
                success: r.info.success,
                end: r.info.end.map(|e| e.to_string()).unwrap_or_default(),
                episode_return: env.episode_return(),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: Task,
    pub character: String,
    pub policy: String,
    pub autopickup_gold: bool,
    pub max_steps: u32,
    pub allowed_actions: Vec<String>,
    pub episodes: Vec<EpisodeSummary>,
    pub mean_score: f64,
    pub median_score: f64,
    pub mean_depth: f64,
    pub mean_experience_level: f64,
    pub mean_time: f64,
    pub mean_return: f64,
    /// Only for tasks that end on success.
    pub success_rate: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl EvalReport {
    pub fn from_episodes(
        config: &TaskConfig,
        policy: String,
        episodes: Vec<EpisodeSummary>,
    ) -> Result<EvalReport, EnvError> {
        if episodes.is_empty() {
            return Err(EnvError::EmptyReport);
        }
        let e = &episodes;
        Ok(EvalReport {
            task: config.task,
            character: config.character.to_string(),
            policy,
            autopickup_gold: config.autopickup_gold,
            max_steps: config.max_steps,
            allowed_actions: config.allowed_actions.iter().map(|a| a.name()).collect(),
            mean_score: mean(e.iter().map(|x| x.score as f64)),
            median_score: median(e.iter().map(|x| x.score as f64).collect()),
            mean_depth: mean(e.iter().map(|x| x.deepest as f64)),
            mean_experience_level: mean(e.iter().map(|x| x.experience_level as f64)),
            mean_time: mean(e.iter().map(|x| x.turn as f64)),
            mean_return: mean(e.iter().map(|x| x.episode_return)),
            success_rate: config
                .task
                .has_success()
                .then(|| mean(e.iter().map(|x| if x.success { 1.0 } else { 0.0 }))),
            episodes,
        })
    }

    /// One CSV row per episode.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        for ep in &self.episodes {
            wtr.serialize(ep)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let rate = match self.success_rate {
            Some(r) => format!("{:.1}%", r * 100.0),
            None => "n/a".into(),
        };
        let rows = [
            ("task", self.task.to_string()),
            ("character", self.character.clone()),
            ("policy", self.policy.clone()),
            ("autopickup gold", self.autopickup_gold.to_string()),
            ("max steps", self.max_steps.to_string()),
            ("actions", self.allowed_actions.join(" ")),
            ("episodes", self.episodes.len().to_string()),
            ("mean score", format!("{:.1}", self.mean_score)),
            ("median score", format!("{:.1}", self.median_score)),
            ("mean dungeon level", format!("{:.2}", self.mean_depth)),
            ("mean exp level", format!("{:.2}", self.mean_experience_level)),
            ("mean time", format!("{:.1}", self.mean_time)),
            ("mean return", format!("{:.3}", self.mean_return)),
            ("success rate", rate),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

/// Evaluates `policy` on the given seeds; each game seed gets a derived episode seed.
pub fn run_eval(
    config: &TaskConfig,
    tables: Arc<ConfigTables>,
    policy: &mut dyn Policy,
    seeds: &[u64],
) -> Result<EvalReport, EnvError> {
    if seeds.is_empty() {
        return Err(EnvError::EmptyReport);
    }
    let mut env = Env::new(config.clone(), tables)?;
    let mut episodes = Vec::with_capacity(seeds.len());
    for &s in seeds {
        episodes.push(run_episode(&mut env, policy, s, derive_episode_seed(s))?);
    }
    EvalReport::from_episodes(config, policy.name(), episodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Transition {
        Transition {
            time_advanced: true,
            ..Transition::default()
        }
    }

    #[test]
    fn task_names_roundtrip() {
        for task in Task::ALL {
            assert_eq!(task.name().parse::<Task>().unwrap(), task);
        }
        assert!("dance".parse::<Task>().is_err());
    }

    #[test]
    fn task_defaults() {
        assert_eq!(TaskConfig::new(Task::Staircase).max_steps, 1000);
        assert_eq!(TaskConfig::new(Task::Pet).max_steps, 1000);
        assert_eq!(TaskConfig::new(Task::Score).max_steps, 10_000);
        assert!(TaskConfig::new(Task::Gold).autopickup_gold);
        assert!(!TaskConfig::new(Task::Eat).autopickup_gold);
    }

    #[test]
    fn rewards_per_task() {
        let stairs = Transition {
            reached_staircase: true,
            ..t()
        };
        assert_eq!(task_reward(Task::Staircase, &stairs), 100.0);
        assert_eq!(task_reward(Task::Pet, &stairs), 0.0);
        let with_pet = Transition {
            pet_adjacent: true,
            ..stairs.clone()
        };
        assert_eq!(task_reward(Task::Pet, &with_pet), 100.0);
        let ate = Transition {
            events: vec![Event::Ate { nutrition: 800 }],
            prev_nutrition: 100,
            next_nutrition: 899,
            ..t()
        };
        assert_eq!(task_reward(Task::Eat, &ate), 800.0);
        let hungry = Transition {
            prev_nutrition: 100,
            next_nutrition: 99,
            ..t()
        };
        assert_eq!(task_reward(Task::Eat, &hungry), 0.0);
        let gold = Transition {
            events: vec![Event::GoldCollected(37)],
            ..t()
        };
        assert_eq!(task_reward(Task::Gold, &gold), 37.0);
        let scout = Transition {
            newly_uncovered_tiles: 14,
            ..t()
        };
        assert_eq!(task_reward(Task::Scout, &scout), 14.0);
        let score = Transition {
            prev_score: 10,
            next_score: 110,
            ..t()
        };
        assert_eq!(task_reward(Task::Score, &score), 100.0);
        let oracle = Transition {
            reached_oracle: true,
            ..t()
        };
        assert_eq!(task_reward(Task::Oracle, &oracle), 1000.0);
    }

    #[test]
    fn env_file_parsing() {
        let f = EnvFile::parse(
            r#"
task = "pet"
character = "val-dwa-law-fem"
max_steps = 50
allowed_actions = ["movement", "search", "kick", "eat"]

[seeds]
master = 3
train_size = 10
"#,
        )
        .unwrap();
        let c = f.task_config().unwrap();
        assert_eq!(c.task, Task::Pet);
        assert_eq!(c.max_steps, 50);
        assert_eq!(c.allowed_actions.len(), 19);
        assert_eq!(f.seeds.train_size, 10);
        assert!(EnvFile::parse("task = \"pet\"\nbogus = 1\n").is_err());
        let bad = EnvFile::parse("task = \"dance\"\n").unwrap();
        assert!(matches!(bad.task_config(), Err(ConfigError::UnknownTask(_))));
    }

    #[test]
    fn seed_pool_shapes() {
        let p = SeedPool::new(1000, 1).unwrap();
        assert_eq!(p.train().len(), 1000);
        assert_eq!(p.test().len(), 100);
        assert!(p.train().iter().all(|s| !p.test().contains(s)));
        assert_eq!(p, SeedPool::new(1000, 1).unwrap());
        let mut one = SeedPool::new(1, 9).unwrap();
        let s = one.next_train();
        assert!((0..10).all(|_| one.next_train() == s));
        assert!(SeedPool::new(0, 1).is_err());
        let ev = p.eval_seeds(150);
        assert_eq!(ev.len(), 150);
        assert!(ev.iter().all(|s| !p.train().contains(s)));
        assert_eq!(&ev[..100], p.test());
    }

    #[test]
    fn eval_on_zero_seeds_is_an_error() {
        let cfg = TaskConfig::new(Task::Staircase);
        let mut pol = RandomPolicy::new(0);
        assert!(matches!(
            run_eval(&cfg, ConfigTables::builtin(), &mut pol, &[]),
            Err(EnvError::EmptyReport)
        ));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn policy_names() {
        assert!(policy_by_name("random", 1).is_ok());
        assert!(policy_by_name("greedy-descend", 1).is_ok());
        assert_eq!(policy_by_name("scripted:search", 1).unwrap().name(), "scripted(search)");
        assert!(policy_by_name("clever", 1).is_err());
    }
}
