//! C ABI for driving environments from another language.
//!
//! Every observation crosses the boundary as one little-endian buffer laid out
//! per the `LAYOUT` text returned by [`delve_layout`]. Functions returning
//! `i32` use the `DELVE_*` status codes; on failure the message is available
//! from [`delve_last_error`] on the same thread.
//!
//! A handle is owned by the caller between [`delve_env_new`] and
//! [`delve_env_close`] and must not be used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;
use std::sync::OnceLock;

use delve::config::ConfigTables;
use delve::env::{EndReason, Env, EnvFile, Task, TaskConfig};
use delve::error::{EngineError, EnvError};
use delve::observe::{layout_text, FLAT_SIZE, LAYOUT_VERSION};

pub const DELVE_OK: i32 = 0;
pub const DELVE_NULL_HANDLE: i32 = -1;
pub const DELVE_BAD_ARGUMENT: i32 = -2;
pub const DELVE_EPISODE_OVER: i32 = -3;
pub const DELVE_NOT_RESET: i32 = -4;
pub const DELVE_ERROR: i32 = -5;

pub const DELVE_END_NONE: i32 = 0;
pub const DELVE_END_SUCCESS: i32 = 1;
pub const DELVE_END_DEATH: i32 = 2;
pub const DELVE_END_STEP_LIMIT: i32 = 3;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

fn fail(code: i32, msg: impl ToString) -> i32 {
    set_error(msg);
    code
}

fn env_error_code(e: &EnvError) -> i32 {
    match e {
        EnvError::Engine(EngineError::EpisodeOver) => DELVE_EPISODE_OVER,
        EnvError::NotReset => DELVE_NOT_RESET,
        EnvError::ActionIndex { .. } | EnvError::InvalidParameter(_) => DELVE_BAD_ARGUMENT,
        _ => DELVE_ERROR,
    }
}

/// Opaque environment handle.
pub struct DelveEnv {
    env: Env,
}

/// Per-step scalars written by [`delve_env_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DelveStep {
    pub reward: f64,
    pub done: u8,
    pub time_advanced: u8,
    pub success: u8,
    /// One of the `DELVE_END_*` codes.
    pub end: i32,
    pub steps: u32,
    pub depth: u32,
    pub score: i64,
    pub turn: u64,
}

#[no_mangle]
pub extern "C" fn delve_layout_version() -> u32 {
    LAYOUT_VERSION
}

/// NUL-terminated layout text; static, never freed by the caller.
#[no_mangle]
pub extern "C" fn delve_layout() -> *const c_char {
    static TEXT: OnceLock<CString> = OnceLock::new();
    TEXT.get_or_init(|| CString::new(layout_text()).expect("layout has no nul"))
        .as_ptr()
}

#[no_mangle]
pub extern "C" fn delve_flat_size() -> usize {
    FLAT_SIZE
}

/// Message of the last failure on this thread. Valid until the next call.
#[no_mangle]
pub extern "C" fn delve_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, String> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| format!("{what} is not UTF-8"))
}

fn build_config(task: Option<&str>, toml: Option<&str>) -> Result<TaskConfig, String> {
    let mut cfg = match toml {
        Some(t) => EnvFile::parse(t)
            .and_then(|f| f.task_config())
            .map_err(|e| e.to_string())?,
        None => TaskConfig::new(Task::Score),
    };
    if let Some(name) = task {
        let task: Task = name.parse().map_err(|e: delve::error::ConfigError| e.to_string())?;
        if toml.is_none() {
            cfg = TaskConfig::new(task);
        } else if task != cfg.task {
            return Err(format!("task {name:?} conflicts with config task {}", cfg.task));
        }
    }
    Ok(cfg)
}

/// Creates an environment. `task` names one of the tasks; `config_toml` is an
/// optional environment file body. Either may be null. Returns null on error.
///
/// # Safety
/// Non-null pointers must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn delve_env_new(task: *const c_char, config_toml: *const c_char) -> *mut DelveEnv {
    let made = (|| {
        let task = str_arg(task, "task")?;
        let toml = str_arg(config_toml, "config")?;
        let cfg = build_config(task, toml)?;
        let tables = ConfigTables::from_env().map_err(|e| e.to_string())?;
        Env::new(cfg, tables).map_err(|e| e.to_string())
    })();
    match made {
        Ok(env) => Box::into_raw(Box::new(DelveEnv { env })),
        Err(msg) => {
            set_error(msg);
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `env` must come from [`delve_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn delve_env_close(env: *mut DelveEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Size of the allowed action set, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn delve_env_num_actions(env: *const DelveEnv) -> u32 {
    env.as_ref().map_or(0, |h| h.env.allowed_actions().len() as u32)
}

/// Keyboard value of allowed action `index`, or -1.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn delve_env_action_ascii(env: *const DelveEnv, index: u32) -> i32 {
    env.as_ref()
        .and_then(|h| h.env.allowed_actions().get(index as usize))
        .map_or(-1, |a| i32::from(a.ascii()))
}

unsafe fn write_obs(h: &DelveEnv, out: *mut u8, len: usize) -> i32 {
    if out.is_null() || len < FLAT_SIZE {
        return fail(
            DELVE_BAD_ARGUMENT,
            format!("observation buffer needs {FLAT_SIZE} bytes, got {len}"),
        );
    }
    let buf = std::slice::from_raw_parts_mut(out, FLAT_SIZE);
    h.env.observation().write_flat(buf);
    DELVE_OK
}

/// Starts an episode and writes the first observation into `out`.
///
/// # Safety
/// `env` must be null or a live handle; `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn delve_env_reset(
    env: *mut DelveEnv,
    game_seed: u64,
    episode_seed: u64,
    out: *mut u8,
    len: usize,
) -> i32 {
    let Some(h) = env.as_mut() else {
        return fail(DELVE_NULL_HANDLE, "null handle");
    };
    if let Err(e) = h.env.reset(game_seed, episode_seed) {
        return fail(env_error_code(&e), e);
    }
    write_obs(h, out, len)
}

/// Applies allowed action `action`, writing the observation into `out` and the
/// scalars into `step`.
///
/// # Safety
/// `env` must be null or a live handle; `out` must point to `len` writable
/// bytes; `step` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn delve_env_step(
    env: *mut DelveEnv,
    action: u32,
    out: *mut u8,
    len: usize,
    step: *mut DelveStep,
) -> i32 {
    let Some(h) = env.as_mut() else {
        return fail(DELVE_NULL_HANDLE, "null handle");
    };
    if out.is_null() || len < FLAT_SIZE {
        return fail(
            DELVE_BAD_ARGUMENT,
            format!("observation buffer needs {FLAT_SIZE} bytes, got {len}"),
        );
    }
    let r = match h.env.step(action as usize) {
        Ok(r) => r,
        Err(e) => return fail(env_error_code(&e), e),
    };
    if let Some(s) = step.as_mut() {
        *s = DelveStep {
            reward: r.reward,
            done: u8::from(r.done),
            time_advanced: u8::from(r.info.time_advanced),
            success: u8::from(r.info.success),
            end: match r.info.end {
                None => DELVE_END_NONE,
                Some(EndReason::Success) => DELVE_END_SUCCESS,
                Some(EndReason::Death(_)) => DELVE_END_DEATH,
                Some(EndReason::StepLimit) => DELVE_END_STEP_LIMIT,
            },
            steps: r.info.steps,
            depth: r.info.depth,
            score: r.info.score,
            turn: r.info.turn,
        };
    }
    write_obs(h, out, len)
}

/// Hash of the current frame, as stored in episode records; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn delve_env_frame_hash(env: *const DelveEnv) -> u64 {
    env.as_ref().map_or(0, |h| h.env.observation().frame_hash())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_and_config_must_agree() {
        assert!(build_config(Some("gold"), None).unwrap().autopickup_gold);
        assert!(build_config(Some("bogus-task"), None).is_err());
        let toml = "task = \"eat\"\n";
        assert_eq!(build_config(None, Some(toml)).unwrap().task, Task::Eat);
        assert!(build_config(Some("gold"), Some(toml)).is_err());
        assert_eq!(build_config(None, None).unwrap().task, Task::Score);
    }

    #[test]
    fn errors_map_to_codes() {
        assert_eq!(env_error_code(&EnvError::NotReset), DELVE_NOT_RESET);
        assert_eq!(
            env_error_code(&EnvError::Engine(EngineError::EpisodeOver)),
            DELVE_EPISODE_OVER
        );
        assert_eq!(
            env_error_code(&EnvError::ActionIndex { index: 9, len: 2 }),
            DELVE_BAD_ARGUMENT
        );
    }
}
