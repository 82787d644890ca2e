//! Keyboard-level action ids.
//!
//! Values are the ASCII codes of the classic roguelike key bindings; only commands the
//! engine implements are listed.

use std::fmt;

use crate::config::sha256_hex;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North,
    East,
    South,
    West,
    NorthEast,
    SouthEast,
    SouthWest,
    NorthWest,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
        Direction::NorthEast,
        Direction::SouthEast,
        Direction::SouthWest,
        Direction::NorthWest,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::NorthEast => (1, -1),
            Direction::SouthEast => (1, 1),
            Direction::SouthWest => (-1, 1),
            Direction::NorthWest => (-1, -1),
        }
    }

    pub fn from_delta(dx: i32, dy: i32) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| d.delta() == (dx.signum(), dy.signum()) && (dx, dy) != (0, 0))
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.delta();
        dx != 0 && dy != 0
    }

    fn key(self) -> u8 {
        match self {
            Direction::North => b'k',
            Direction::East => b'l',
            Direction::South => b'j',
            Direction::West => b'h',
            Direction::NorthEast => b'u',
            Direction::SouthEast => b'n',
            Direction::SouthWest => b'b',
            Direction::NorthWest => b'y',
        }
    }

    fn name(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::East => "east",
            Direction::South => "south",
            Direction::West => "west",
            Direction::NorthEast => "northeast",
            Direction::SouthEast => "southeast",
            Direction::SouthWest => "southwest",
            Direction::NorthWest => "northwest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Move(Direction),
    MoveFar(Direction),
    Kick,
    More,
    Esc,
    Pickup,
    Wait,
    Up,
    Down,
    Close,
    Eat,
    Open,
    Search,
}

impl Action {
    /// Every implemented action, compass directions first.
    pub fn all() -> Vec<Action> {
        let mut v: Vec<Action> = Direction::ALL.into_iter().map(Action::Move).collect();
        v.extend(Direction::ALL.into_iter().map(Action::MoveFar));
        v.extend([
            Action::Kick,
            Action::More,
            Action::Esc,
            Action::Pickup,
            Action::Wait,
            Action::Up,
            Action::Down,
            Action::Close,
            Action::Eat,
            Action::Open,
            Action::Search,
        ]);
        v
    }

    /// The default allowed set: movement, search, kick, eat, open, down, up, pickup.
    pub fn default_set() -> Vec<Action> {
        let mut v: Vec<Action> = Direction::ALL.into_iter().map(Action::Move).collect();
        v.extend(Direction::ALL.into_iter().map(Action::MoveFar));
        v.extend([
            Action::Search,
            Action::Kick,
            Action::Eat,
            Action::Open,
            Action::Down,
            Action::Up,
            Action::Pickup,
        ]);
        v
    }

    /// ASCII value sent to the game.
    pub fn ascii(self) -> u8 {
        match self {
            Action::Move(d) => d.key(),
            Action::MoveFar(d) => d.key().to_ascii_uppercase(),
            Action::Kick => 4,
            Action::More => 13,
            Action::Esc => 27,
            Action::Pickup => b',',
            Action::Wait => b'.',
            Action::Up => b'<',
            Action::Down => b'>',
            Action::Close => b'c',
            Action::Eat => b'e',
            Action::Open => b'o',
            Action::Search => b's',
        }
    }

    pub fn from_ascii(value: u8) -> Option<Action> {
        Action::all().into_iter().find(|a| a.ascii() == value)
    }

    pub fn name(self) -> String {
        match self {
            Action::Move(d) => d.name().to_string(),
            Action::MoveFar(d) => format!("far_{}", d.name()),
            Action::Kick => "kick".into(),
            Action::More => "more".into(),
            Action::Esc => "esc".into(),
            Action::Pickup => "pickup".into(),
            Action::Wait => "wait".into(),
            Action::Up => "up".into(),
            Action::Down => "down".into(),
            Action::Close => "close".into(),
            Action::Eat => "eat".into(),
            Action::Open => "open".into(),
            Action::Search => "search".into(),
        }
    }

    /// Parses an action name, or the group name `movement` (all 16 compass actions).
    pub fn parse_names(names: &[String]) -> Result<Vec<Action>, ConfigError> {
        let all = Action::all();
        let mut out = Vec::new();
        for n in names {
            if n == "movement" {
                out.extend(Direction::ALL.into_iter().map(Action::Move));
                out.extend(Direction::ALL.into_iter().map(Action::MoveFar));
                continue;
            }
            let a = all
                .iter()
                .copied()
                .find(|a| a.name() == *n)
                .ok_or_else(|| ConfigError::UnknownAction(n.clone()))?;
            out.push(a);
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|a| seen.insert(*a));
        if out.is_empty() {
            return Err(ConfigError::Invalid("allowed action set is empty".into()));
        }
        Ok(out)
    }

    /// Key as typed at the keyboard, e.g. `h`, `H` or `C-d`.
    pub fn key_label(self) -> String {
        match self.ascii() {
            4 => "C-d".into(),
            13 => "C-m".into(),
            27 => "C-[".into(),
            c => (c as char).to_string(),
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::Move(d) | Action::MoveFar(d) => Some(d),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.ascii())
    }
}

/// SHA-256 over the implemented action table (`value name` lines).
pub fn action_table_hash() -> String {
    let text: String = Action::all()
        .into_iter()
        .map(|a| format!("{} {}\n", a.ascii(), a.name()))
        .collect();
    sha256_hex(text.as_bytes())
}

/// Maps a raw key byte to an action, if bound.
pub fn action_for_key(key: u8) -> Option<Action> {
    Action::from_ascii(key)
}
