//! Interactive terminal session.

use std::io::{self, IsTerminal, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use crossterm::cursor::{Hide, MoveTo, Show};
use crossterm::event::{self, Event, KeyCode, KeyEvent, KeyEventKind, KeyModifiers};
use crossterm::style::{Color, Print, ResetColor, SetForegroundColor};
use crossterm::terminal::{self, Clear, ClearType, EnterAlternateScreen, LeaveAlternateScreen};
use crossterm::{execute, queue};

use delve::action::{action_for_key, Action};
use delve::config::ConfigTables;
use delve::dungeon::{MAP_HEIGHT, MAP_WIDTH};
use delve::env::{Env, TaskConfig};
use delve::observe::bl;
use delve::recording::{record_episode, ActionSource};

const CTRL_C: u8 = 3;
const CTRL_Q: u8 = 17;

/// Raw byte a key press stands for, as the game would read it.
pub fn key_byte(key: &KeyEvent) -> Option<u8> {
    match key.code {
        KeyCode::Char(c) if c.is_ascii() && key.modifiers.contains(KeyModifiers::CONTROL) => {
            Some(c.to_ascii_lowercase() as u8 & 0x1f)
        }
        KeyCode::Char(c) if c.is_ascii() => Some(c as u8),
        KeyCode::Enter => Some(13),
        KeyCode::Esc => Some(27),
        _ => None,
    }
}

/// What a key byte means for a session with the given allowed actions.
#[derive(Debug, PartialEq, Eq)]
pub enum KeyMeaning {
    Act(Action),
    Quit,
    NotAllowed(Action),
    Unbound,
}

pub fn interpret(byte: u8, allowed: &[Action]) -> KeyMeaning {
    if byte == CTRL_C || byte == CTRL_Q {
        return KeyMeaning::Quit;
    }
    match action_for_key(byte) {
        Some(a) if allowed.contains(&a) => KeyMeaning::Act(a),
        Some(a) => KeyMeaning::NotAllowed(a),
        None => KeyMeaning::Unbound,
    }
}

struct Screen;

impl Screen {
    fn open() -> Result<Screen> {
        terminal::enable_raw_mode()?;
        execute!(io::stdout(), EnterAlternateScreen, Hide)?;
        Ok(Screen)
    }
}

impl Drop for Screen {
    fn drop(&mut self) {
        let _ = execute!(io::stdout(), ResetColor, Show, LeaveAlternateScreen);
        let _ = terminal::disable_raw_mode();
    }
}

fn draw(env: &Env, hint: &str) -> io::Result<()> {
    let obs = env.observation();
    let mut out = io::stdout().lock();
    queue!(out, MoveTo(0, 0), Clear(ClearType::All), Print(obs.message_text()))?;
    for y in 0..MAP_HEIGHT {
        queue!(out, MoveTo(0, y as u16 + 1))?;
        let mut color = None;
        for x in 0..MAP_WIDTH {
            let i = y * MAP_WIDTH + x;
            let c = obs.colors[i];
            if color != Some(c) {
                queue!(out, SetForegroundColor(Color::AnsiValue(c)))?;
                color = Some(c);
            }
            queue!(out, Print(obs.chars[i] as char))?;
        }
    }
    let b = &obs.blstats;
    let status = format!(
        "Dlvl:{} $:{} HP:{}({}) Pw:{}({}) AC:{} Xp:{}/{} T:{} Score:{}",
        b[bl::DEPTH],
        b[bl::GOLD],
        b[bl::HITPOINTS],
        b[bl::MAX_HITPOINTS],
        b[bl::ENERGY],
        b[bl::MAX_ENERGY],
        b[bl::ARMOR_CLASS],
        b[bl::EXPERIENCE_LEVEL],
        b[bl::EXPERIENCE_POINTS],
        b[bl::TIME],
        b[bl::SCORE],
    );
    queue!(
        out,
        ResetColor,
        MoveTo(0, MAP_HEIGHT as u16 + 1),
        Print(status),
        MoveTo(0, MAP_HEIGHT as u16 + 2),
        Print(format!("step {} return {:.3}  {hint}", env.steps(), env.episode_return())),
    )?;
    out.flush()
}

fn next_byte() -> io::Result<u8> {
    loop {
        if let Event::Key(k) = event::read()? {
            if k.kind != KeyEventKind::Release {
                if let Some(b) = key_byte(&k) {
                    return Ok(b);
                }
            }
        }
    }
}

pub fn run(config: TaskConfig, tables: Arc<ConfigTables>, seed: u64, record: &Path) -> Result<()> {
    if !io::stdin().is_terminal() || !io::stdout().is_terminal() {
        return Err(crate::usage("play needs an interactive terminal"));
    }
    let mut env = Env::new(config, tables)?;
    let episode_seed = delve::env::derive_episode_seed(seed);
    let mut failure: Option<io::Error> = None;
    let rec = {
        let _screen = Screen::open()?;
        let mut hint = String::from("C-c or C-q quits");
        let mut ask = |env: &Env| -> Option<Action> {
            loop {
                let byte = draw(env, &hint).and_then(|_| next_byte());
                let byte = match byte {
                    Ok(b) => b,
                    Err(e) => {
                        failure = Some(e);
                        return None;
                    }
                };
                match interpret(byte, env.allowed_actions()) {
                    KeyMeaning::Act(a) => {
                        hint.clear();
                        return Some(a);
                    }
                    KeyMeaning::Quit => return None,
                    KeyMeaning::NotAllowed(a) => hint = format!("{} is not allowed in this task", a.name()),
                    KeyMeaning::Unbound => {
                        hint = format!("key {} is not bound; C-c or C-q quits", byte)
                    }
                }
            }
        };
        let rec = record_episode(&mut env, ActionSource::Callback(&mut ask), seed, episode_seed, record);
        if rec.as_ref().is_ok_and(|r| r.footer.is_some()) && failure.is_none() {
            let _ = draw(&env, "episode over; press any key");
            let _ = next_byte();
        }
        rec
    };
    if let Some(e) = failure {
        return Err(e).context("reading the terminal");
    }
    let rec = rec?;
    match &rec.footer {
        Some(f) => println!(
            "{}: score {} depth {} turns {} steps {} return {:.3}",
            f.end, f.score, f.deepest, f.turn, f.steps, f.episode_return
        ),
        None => println!("quit after {} steps", rec.steps.len()),
    }
    println!("recorded to {}", record.display());
    Ok(())
}
