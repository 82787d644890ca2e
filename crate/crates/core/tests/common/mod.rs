#![allow(dead_code)]

use delve::config::ConfigTables;
use delve::dungeon::{GenConfig, Pos, Room, Tile, WallKind, MAP_TILES};
use delve::engine::{CharacterSpec, GameOptions, GameState};

pub fn new_game(game_seed: u64, episode_seed: u64) -> GameState {
    GameState::new(
        ConfigTables::builtin(),
        GenConfig::default(),
        CharacterSpec::default(),
        GameOptions::default(),
        game_seed,
        episode_seed,
    )
    .unwrap()
}

/// Wipes the current level down to the given rooms, with no creatures or objects.
pub fn clear_level(g: &mut GameState, rooms: &[Room]) {
    g.set_pet(None);
    let lvl = g.level_mut();
    lvl.tiles = vec![Tile::Stone; MAP_TILES];
    for room in rooms {
        for y in room.y - 1..=room.y + room.h {
            for x in room.x - 1..=room.x + room.w {
                let p = Pos::new(x, y);
                let t = if room.contains(p) {
                    Tile::Floor
                } else if x == room.x - 1 || x == room.x + room.w {
                    Tile::Wall(WallKind::Vertical)
                } else {
                    Tile::Wall(WallKind::Horizontal)
                };
                lvl.set_tile(p, t);
            }
        }
    }
    lvl.rooms = rooms.to_vec();
    lvl.monsters.clear();
    lvl.objects.clear();
    lvl.traps.clear();
    lvl.boulders.clear();
    lvl.staircase_up = None;
    lvl.staircase_down = None;
    lvl.vision = Default::default();
}

pub fn room(x: i32, y: i32, w: i32, h: i32, lit: bool) -> Room {
    Room { x, y, w, h, lit }
}
