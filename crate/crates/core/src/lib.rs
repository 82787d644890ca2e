//! A small procedurally generated dungeon game exposed as a reinforcement
//! learning environment.

pub mod action;
pub mod bench;
pub mod config;
pub mod dungeon;
pub mod engine;
pub mod entity;
pub mod env;
pub mod error;
pub mod glyph;
pub mod observe;
pub mod recording;
pub mod rng;
