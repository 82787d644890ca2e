use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlyphError {
    #[error("invalid glyph id {0}")]
    InvalidGlyph(u16),
    #[error("unknown entity kind {0:?}")]
    UnknownEntity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("depth {depth} outside 1..={max_depth}")]
    InvalidDepth { depth: u32, max_depth: u32 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown character spec {0:?}")]
    UnknownCharacter(String),
    #[error("malformed character spec {0:?}, expected role-race-alignment-gender")]
    MalformedCharacter(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("table {table}: unsupported version {found}")]
    Version { table: &'static str, found: u32 },
    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("action {0} is not allowed")]
    IllegalAction(u8),
    #[error("episode is over")]
    EpisodeOver,
    #[error("{0} is not edible")]
    Inedible(String),
    #[error("no such inventory slot {0:?}")]
    NoSuchSlot(char),
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("action index {index} out of range for {len} allowed actions")]
    ActionIndex { index: usize, len: usize },
    #[error("reset must be called before step")]
    NotReset,
    #[error("evaluation needs at least one episode")]
    EmptyReport,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("I/O error after {steps_written} steps (partial file at {path}): {source}")]
    Partial {
        path: PathBuf,
        steps_written: usize,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt record at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("stale config: table {table} hash {recorded} differs from loaded {current}")]
    StaleConfig {
        table: String,
        recorded: String,
        current: String,
    },
    #[error("action table hash {recorded} differs from this build's {current}")]
    ActionTableMismatch { recorded: String, current: String },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObserveError {
    #[error("crop size must be odd, got {0}")]
    EvenCropSize(usize),
    #[error("crop center ({x},{y}) is off the map")]
    CenterOffMap { x: i32, y: i32 },
    #[error("layout file: {0}")]
    Layout(String),
}
