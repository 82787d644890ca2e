use std::ffi::{CStr, CString};
use std::ptr;

use delve::action::Action;
use delve::config::ConfigTables;
use delve::env::{Env, Task, TaskConfig};
use delve::observe::{parse_layout, FLAT_SIZE};
use delve::recording::{record_episode, ActionSource};
use delve_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(delve_last_error()) }.to_string_lossy().into_owned()
}

fn new_env(task: &str) -> *mut DelveEnv {
    let t = CString::new(task).unwrap();
    unsafe { delve_env_new(t.as_ptr(), ptr::null()) }
}

#[test]
fn layout_matches_shipped_file() {
    let text = unsafe { CStr::from_ptr(delve_layout()) }.to_str().unwrap();
    let shipped = include_str!("../../core/data/LAYOUT");
    assert_eq!(text, shipped);
    let layout = parse_layout(text).unwrap();
    assert_eq!(layout.size, delve_flat_size());
    assert_eq!(delve_layout_version(), 1);
    let shape = |n: &str| layout.field(n).unwrap().shape.clone();
    assert_eq!(shape("glyphs"), vec![21, 79]);
    assert_eq!(shape("blstats"), vec![25]);
    assert_eq!(shape("message"), vec![256]);
    assert_eq!(shape("inv_glyphs"), vec![55]);
    assert_eq!(shape("inv_strs"), vec![55, 80]);
}

#[test]
fn boundary_stream_equals_native() {
    for task in ["score", "gold", "staircase", "pet"] {
        let h = new_env(task);
        assert!(!h.is_null(), "{}", last_error());
        let mut native = Env::with_builtin(TaskConfig::new(task.parse().unwrap())).unwrap();
        let mut buf = vec![0u8; FLAT_SIZE];
        unsafe {
            assert_eq!(delve_env_reset(h, 17, 18, buf.as_mut_ptr(), buf.len()), DELVE_OK);
        }
        native.reset(17, 18).unwrap();
        assert_eq!(buf, native.observation().to_flat());
        let n = unsafe { delve_env_num_actions(h) };
        assert_eq!(n as usize, native.allowed_actions().len());
        for i in 0..500u32 {
            let a = (i * 7 + 3) % n;
            let mut st = DelveStep::default();
            let code = unsafe { delve_env_step(h, a, buf.as_mut_ptr(), buf.len(), &mut st) };
            assert_eq!(code, DELVE_OK, "{}", last_error());
            let r = native.step(a as usize).unwrap();
            assert_eq!(buf, native.observation().to_flat());
            assert_eq!(st.reward.to_bits(), r.reward.to_bits());
            assert_eq!(st.done == 1, r.done);
            assert_eq!(st.steps, r.info.steps);
            assert_eq!(unsafe { delve_env_frame_hash(h) }, native.observation().frame_hash());
            if r.done {
                assert_ne!(st.end, DELVE_END_NONE);
                let code = unsafe { delve_env_step(h, 0, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
                assert_eq!(code, DELVE_EPISODE_OVER);
                break;
            }
        }
        unsafe { delve_env_close(h) };
    }
}

#[test]
fn boundary_episode_matches_native_record() {
    let dir = tempfile::tempdir().unwrap();
    let h = new_env("gold");
    let mut buf = vec![0u8; FLAT_SIZE];
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut hashes = Vec::new();
    unsafe {
        delve_env_reset(h, 5, 6, buf.as_mut_ptr(), buf.len());
        let n = delve_env_num_actions(h);
        for i in 0..300u32 {
            let a = (i * 11 + 1) % n;
            let mut st = DelveStep::default();
            assert_eq!(delve_env_step(h, a, buf.as_mut_ptr(), buf.len(), &mut st), DELVE_OK);
            actions.push(Action::from_ascii(delve_env_action_ascii(h, a) as u8).unwrap());
            rewards.push(st.reward);
            hashes.push(delve_env_frame_hash(h));
            if st.done == 1 {
                break;
            }
        }
        delve_env_close(h);
    }
    let mut env = Env::new(TaskConfig::new(Task::Gold), ConfigTables::builtin()).unwrap();
    let rec = record_episode(&mut env, ActionSource::List(&actions), 5, 6, &dir.path().join("g")).unwrap();
    assert_eq!(rec.steps.len(), actions.len());
    for (i, st) in rec.steps.iter().enumerate() {
        assert_eq!(st.reward.to_bits(), rewards[i].to_bits());
        assert_eq!(st.frame_hash, hashes[i]);
    }
}

#[test]
fn misuse_is_reported() {
    let bogus = CString::new("bogus-task").unwrap();
    let h = unsafe { delve_env_new(bogus.as_ptr(), ptr::null()) };
    assert!(h.is_null());
    assert!(last_error().contains("bogus-task"));

    let mut buf = vec![0u8; FLAT_SIZE];
    let code = unsafe { delve_env_reset(ptr::null_mut(), 1, 1, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(code, DELVE_NULL_HANDLE);

    let h = new_env("score");
    unsafe {
        assert_eq!(delve_env_step(h, 0, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), DELVE_NOT_RESET);
        assert_eq!(delve_env_reset(h, 1, 1, buf.as_mut_ptr(), 10), DELVE_BAD_ARGUMENT);
        assert!(last_error().contains(&FLAT_SIZE.to_string()));
        assert_eq!(delve_env_reset(h, 1, 1, buf.as_mut_ptr(), buf.len()), DELVE_OK);
        let n = delve_env_num_actions(h);
        assert_eq!(delve_env_step(h, n, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), DELVE_BAD_ARGUMENT);
        assert_eq!(delve_env_action_ascii(h, n), -1);
        delve_env_close(h);
        delve_env_close(ptr::null_mut());
    }
}

#[test]
fn config_text_selects_actions() {
    let toml = CString::new("task = \"staircase\"\nallowed_actions = [\"north\", \"south\", \"down\"]\n").unwrap();
    let h = unsafe { delve_env_new(ptr::null(), toml.as_ptr()) };
    assert!(!h.is_null(), "{}", last_error());
    unsafe {
        assert_eq!(delve_env_num_actions(h), 3);
        assert_eq!(delve_env_action_ascii(h, 2), i32::from(b'>'));
        delve_env_close(h);
    }
}
