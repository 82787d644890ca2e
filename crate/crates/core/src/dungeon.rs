//! Deterministic procedural generation of dungeon levels.
//!
//! A level is a 21x79 grid holding 4 to 9 rectangular rooms joined by
//! corridors along a left-to-right spanning chain plus up to two extra edges.
//! Generation for `(seed, depth)` draws only from that depth's topology
//! stream, so levels are independent of each other and of play.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::entity::{FloorObject, Item, ItemKind};
use crate::error::GenError;
use crate::glyph::{self, GlyphId};
use crate::rng::{self, StreamKind, StreamRng};

pub const MAP_WIDTH: usize = 79;
pub const MAP_HEIGHT: usize = 21;
pub const MAP_TILES: usize = MAP_WIDTH * MAP_HEIGHT;

pub const DEFAULT_MAX_DEPTH: u32 = 12;
pub const ORACLE_MIN_DEPTH: u32 = 5;
pub const ORACLE_MAX_DEPTH: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    pub fn in_bounds(self) -> bool {
        self.x >= 0 && self.y >= 0 && (self.x as usize) < MAP_WIDTH && (self.y as usize) < MAP_HEIGHT
    }

    /// Row-major tile index. Caller guarantees the position is in bounds.
    #[inline]
    pub fn index(self) -> usize {
        self.y as usize * MAP_WIDTH + self.x as usize
    }

    pub fn from_index(i: usize) -> Self {
        Pos::new((i % MAP_WIDTH) as i32, (i / MAP_WIDTH) as i32)
    }

    pub fn offset(self, dx: i32, dy: i32) -> Pos {
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn chebyshev(self, other: Pos) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn neighbors8(self) -> impl Iterator<Item = Pos> {
        DIRECTIONS8.into_iter().map(move |(dx, dy)| self.offset(dx, dy)).filter(|p| p.in_bounds())
    }

    fn neighbors4(self) -> impl Iterator<Item = Pos> {
        [(0, -1), (1, 0), (0, 1), (-1, 0)]
            .into_iter()
            .map(move |(dx, dy)| self.offset(dx, dy))
            .filter(|p| p.in_bounds())
    }
}

pub const DIRECTIONS8: [(i32, i32); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DoorState {
    Open,
    Closed,
    Locked,
    Hidden,
    /// Kicked in; passable from any direction.
    Broken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WallKind {
    Vertical,
    Horizontal,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tile {
    Stone,
    Wall(WallKind),
    Floor,
    Corridor,
    Door {
        state: DoorState,
        in_vertical_wall: bool,
    },
    StairsUp,
    StairsDown,
}

impl Tile {
    /// Glyph of the bare feature as drawn when lit and in view.
    pub fn glyph(self) -> GlyphId {
        match self {
            Tile::Stone => glyph::STONE,
            Tile::Wall(w) => wall_glyph(w),
            Tile::Floor => glyph::FLOOR_LIT,
            Tile::Corridor => glyph::CORRIDOR,
            Tile::Door {
                state,
                in_vertical_wall,
            } => match state {
                DoorState::Open if in_vertical_wall => glyph::DOOR_OPEN_IN_VERTICAL_WALL,
                DoorState::Open => glyph::DOOR_OPEN_IN_HORIZONTAL_WALL,
                DoorState::Closed | DoorState::Locked => glyph::DOOR_CLOSED,
                DoorState::Hidden if in_vertical_wall => glyph::WALL_VERTICAL,
                DoorState::Hidden => glyph::WALL_HORIZONTAL,
                DoorState::Broken => glyph::DOORWAY,
            },
            Tile::StairsUp => glyph::STAIRCASE_UP,
            Tile::StairsDown => glyph::STAIRCASE_DOWN,
        }
    }

    /// Walkable without opening anything.
    pub fn is_open_ground(self) -> bool {
        matches!(
            self,
            Tile::Floor
                | Tile::Corridor
                | Tile::StairsUp
                | Tile::StairsDown
                | Tile::Door {
                    state: DoorState::Open | DoorState::Broken,
                    ..
                }
        )
    }

    /// Doors with a door frame forbid diagonal movement in or out.
    pub fn blocks_diagonal(self) -> bool {
        matches!(
            self,
            Tile::Door {
                state: DoorState::Open | DoorState::Closed | DoorState::Locked,
                ..
            }
        )
    }
}

fn wall_glyph(w: WallKind) -> GlyphId {
    match w {
        WallKind::Vertical => glyph::WALL_VERTICAL,
        WallKind::Horizontal => glyph::WALL_HORIZONTAL,
        WallKind::TopLeft => glyph::WALL_TOP_LEFT,
        WallKind::TopRight => glyph::WALL_TOP_RIGHT,
        WallKind::BottomLeft => glyph::WALL_BOTTOM_LEFT,
        WallKind::BottomRight => glyph::WALL_BOTTOM_RIGHT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrapKind {
    Arrow,
    BearTrap,
}

/// A room's floor rectangle; its walls sit one tile outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Room {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
    pub lit: bool,
}

impl Room {
    pub fn contains(&self, p: Pos) -> bool {
        p.x >= self.x && p.x < self.x + self.w && p.y >= self.y && p.y < self.y + self.h
    }

    /// Floor plus walls.
    pub fn box_contains(&self, p: Pos) -> bool {
        p.x >= self.x - 1 && p.x <= self.x + self.w && p.y >= self.y - 1 && p.y <= self.y + self.h
    }

    /// Boxes are at least `gap` tiles apart.
    fn separated(&self, other: &Room, gap: i32) -> bool {
        let (ax0, ax1, ay0, ay1) = (self.x - 1, self.x + self.w, self.y - 1, self.y + self.h);
        let (bx0, bx1, by0, by1) = (other.x - 1, other.x + other.w, other.y - 1, other.y + other.h);
        ax1 + gap < bx0 || bx1 + gap < ax0 || ay1 + gap < by0 || by1 + gap < ay0
    }

    fn overlaps(&self, other: &Room) -> bool {
        !self.separated(other, -1)
    }

    pub fn center(&self) -> Pos {
        Pos::new(self.x + self.w / 2, self.y + self.h / 2)
    }

    pub fn tiles(&self) -> impl Iterator<Item = Pos> + '_ {
        (self.y..self.y + self.h).flat_map(move |y| (self.x..self.x + self.w).map(move |x| Pos::new(x, y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DoorSpec {
    pub pos: Pos,
    pub state: DoorState,
    pub in_vertical_wall: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrapSpec {
    pub pos: Pos,
    pub kind: TrapKind,
}

/// Tunable generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub max_depth: u32,
    pub min_rooms: u32,
    pub max_rooms: u32,
    /// Probabilities of open, closed, locked and hidden doors; sums to 1.
    pub door_odds: [f64; 4],
    pub lit_probability: f64,
    pub trap_mean: f64,
    pub boulder_mean: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            min_rooms: 4,
            max_rooms: 9,
            door_odds: [0.45, 0.35, 0.12, 0.08],
            lit_probability: 0.75,
            trap_mean: 2.0,
            boulder_mean: 1.0,
        }
    }
}

impl GenConfig {
    /// Probability that a single door is generated hidden.
    pub fn hidden_door_probability(&self) -> f64 {
        self.door_odds[3]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LevelBlueprint {
    pub depth: u32,
    pub rooms: Vec<Room>,
    pub corridors: Vec<Vec<Pos>>,
    pub doors: Vec<DoorSpec>,
    pub traps: Vec<TrapSpec>,
    pub boulders: Vec<Pos>,
    pub staircase_up: Option<Pos>,
    pub staircase_down: Option<Pos>,
    /// Only set on the first level.
    pub hero_start: Option<Pos>,
    pub oracle: Option<Pos>,
    /// Row-major tile grid, the authoritative map.
    pub tiles: Vec<Tile>,
}

impl LevelBlueprint {
    pub fn tile(&self, p: Pos) -> Tile {
        self.tiles[p.index()]
    }

    pub fn room_at(&self, p: Pos) -> Option<usize> {
        self.rooms.iter().position(|r| r.contains(p))
    }

    /// Plain ASCII dump of the full map, one character per tile.
    pub fn to_ascii(&self) -> String {
        let mut chars: Vec<u8> = self
            .tiles
            .iter()
            .map(|t| glyph::char_and_color(t.glyph()).0)
            .collect();
        for t in &self.traps {
            chars[t.pos.index()] = b'^';
        }
        for b in &self.boulders {
            chars[b.index()] = b'0';
        }
        if let Some(o) = self.oracle {
            chars[o.index()] = b'@';
        }
        let mut out = String::with_capacity(MAP_TILES + MAP_HEIGHT);
        for row in chars.chunks(MAP_WIDTH) {
            out.push_str(std::str::from_utf8(row).expect("ascii"));
            out.push('\n');
        }
        out
    }
}

/// Depth of the Oracle level for a game seed, uniform over 5..=9.
pub fn oracle_depth(game_seed: u64) -> u32 {
    let mut rng = rng::stream(game_seed, StreamKind::Oracle, 0);
    rng.random_range(ORACLE_MIN_DEPTH..=ORACLE_MAX_DEPTH)
}

pub fn generate_level(game_seed: u64, depth: u32, config: &GenConfig) -> Result<LevelBlueprint, GenError> {
    if depth < 1 || depth > config.max_depth {
        return Err(GenError::InvalidDepth {
            depth,
            max_depth: config.max_depth,
        });
    }
    let mut rng = rng::stream(game_seed, StreamKind::Topology, depth as u64);
    let with_oracle = oracle_depth(game_seed) == depth;
    loop {
        if let Some(bp) = try_generate(&mut rng, depth, config, with_oracle) {
            return Ok(bp);
        }
    }
}

struct Builder {
    tiles: Vec<Tile>,
    rooms: Vec<Room>,
    doors: Vec<DoorSpec>,
    corridors: Vec<Vec<Pos>>,
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

fn try_generate(rng: &mut StreamRng, depth: u32, cfg: &GenConfig, with_oracle: bool) -> Option<LevelBlueprint> {
    let target = rng.random_range(cfg.min_rooms..=cfg.max_rooms) as usize;
    let mut rooms: Vec<Room> = Vec::with_capacity(target);
    for _ in 0..400 {
        if rooms.len() == target {
            break;
        }
        let w = rng.random_range(3..=14);
        let h = rng.random_range(3..=6);
        // Walls stay inside columns 1..=77 and rows 1..=19 so corridors can skirt them.
        let x = rng.random_range(2..=(MAP_WIDTH as i32 - 2 - w));
        let y = rng.random_range(2..=(MAP_HEIGHT as i32 - 2 - h));
        let lit = rng.random_bool(cfg.lit_probability);
        let room = Room { x, y, w, h, lit };
        if rooms.iter().all(|r| r.separated(&room, 2)) {
            rooms.push(room);
        }
    }
    if rooms.len() < cfg.min_rooms as usize {
        return None;
    }
    rooms.sort_by_key(|r| (r.x, r.y));

    let mut b = Builder {
        tiles: vec![Tile::Stone; MAP_TILES],
        rooms,
        doors: Vec::new(),
        corridors: Vec::new(),
    };
    for room in b.rooms.clone() {
        b.carve_room(&room);
    }

    let n = b.rooms.len();
    let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let extra = rng.random_range(0..=2);
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        let (a, c) = (a.min(c), a.max(c));
        if a != c && !edges.contains(&(a, c)) {
            edges.push((a, c));
        }
    }
    for (a, c) in edges {
        if !b.join(rng, a, c, cfg) {
            return None;
        }
    }

    let mut taken: Vec<Pos> = Vec::new();
    let staircase_down = if depth < cfg.max_depth {
        let r = rng.random_range(0..n);
        let p = random_free_tile(rng, &b.rooms[r], &taken)?;
        b.tiles[p.index()] = Tile::StairsDown;
        taken.push(p);
        Some(p)
    } else {
        None
    };
    let staircase_up = if depth > 1 {
        let down_room = staircase_down.and_then(|p| b.rooms.iter().position(|r| r.contains(p)));
        let mut r = rng.random_range(0..n);
        if Some(r) == down_room {
            r = (r + 1) % n;
        }
        let p = random_free_tile(rng, &b.rooms[r], &taken)?;
        b.tiles[p.index()] = Tile::StairsUp;
        taken.push(p);
        Some(p)
    } else {
        None
    };
    let hero_start = if depth == 1 {
        let r = rng.random_range(0..n);
        let p = random_free_tile(rng, &b.rooms[r], &taken)?;
        taken.push(p);
        Some(p)
    } else {
        None
    };

    let oracle = if with_oracle {
        let r = rng.random_range(0..n);
        let c = b.rooms[r].center();
        let p = if taken.contains(&c) {
            random_free_tile(rng, &b.rooms[r], &taken)?
        } else {
            c
        };
        taken.push(p);
        Some(p)
    } else {
        None
    };

    let trap_count = sample_poisson(rng, cfg.trap_mean).min(10);
    let mut traps = Vec::with_capacity(trap_count);
    for _ in 0..trap_count {
        let r = rng.random_range(0..n);
        let p = random_free_tile(rng, &b.rooms[r], &taken)?;
        let kind = if rng.random_bool(0.5) {
            TrapKind::Arrow
        } else {
            TrapKind::BearTrap
        };
        taken.push(p);
        traps.push(TrapSpec { pos: p, kind });
    }

    let boulder_count = sample_poisson(rng, cfg.boulder_mean).min(6);
    let mut boulders = Vec::with_capacity(boulder_count);
    for _ in 0..boulder_count {
        let r = rng.random_range(0..n);
        let p = random_free_tile(rng, &b.rooms[r], &taken)?;
        let near_door = p
            .neighbors4()
            .any(|q| matches!(b.tiles[q.index()], Tile::Door { .. }));
        if near_door {
            continue;
        }
        taken.push(p);
        boulders.push(p);
    }

    Some(LevelBlueprint {
        depth,
        rooms: b.rooms,
        corridors: b.corridors,
        doors: b.doors,
        traps,
        boulders,
        staircase_up,
        staircase_down,
        hero_start,
        oracle,
        tiles: b.tiles,
    })
}

fn sample_poisson(rng: &mut StreamRng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

fn random_free_tile(rng: &mut StreamRng, room: &Room, taken: &[Pos]) -> Option<Pos> {
    for _ in 0..64 {
        let p = Pos::new(
            rng.random_range(room.x..room.x + room.w),
            rng.random_range(room.y..room.y + room.h),
        );
        if !taken.contains(&p) {
            return Some(p);
        }
    }
    room.tiles().find(|p| !taken.contains(p))
}

impl Builder {
    fn set(&mut self, p: Pos, t: Tile) {
        self.tiles[p.index()] = t;
    }

    fn carve_room(&mut self, r: &Room) {
        let (x0, x1, y0, y1) = (r.x - 1, r.x + r.w, r.y - 1, r.y + r.h);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = Pos::new(x, y);
                let t = match (x == x0, x == x1, y == y0, y == y1) {
                    (true, _, true, _) => Tile::Wall(WallKind::TopLeft),
                    (_, true, true, _) => Tile::Wall(WallKind::TopRight),
                    (true, _, _, true) => Tile::Wall(WallKind::BottomLeft),
                    (_, true, _, true) => Tile::Wall(WallKind::BottomRight),
                    (true, _, _, _) | (_, true, _, _) => Tile::Wall(WallKind::Vertical),
                    (_, _, true, _) | (_, _, _, true) => Tile::Wall(WallKind::Horizontal),
                    _ => Tile::Floor,
                };
                self.set(p, t);
            }
        }
    }

    fn join(&mut self, rng: &mut StreamRng, a: usize, c: usize, cfg: &GenConfig) -> bool {
        let (ra, rc) = (self.rooms[a], self.rooms[c]);
        let (side_a, side_c) = if rc.x - 1 > ra.x + ra.w {
            (Side::Right, Side::Left)
        } else if rc.y + rc.h < ra.y - 1 {
            (Side::Top, Side::Bottom)
        } else if rc.x + rc.w < ra.x - 1 {
            (Side::Left, Side::Right)
        } else {
            (Side::Bottom, Side::Top)
        };
        let da = self.place_door(rng, &ra, side_a, cfg);
        let dc = self.place_door(rng, &rc, side_c, cfg);
        let start = outside(da, side_a);
        let end = outside(dc, side_c);
        match self.dig(start, end) {
            Some(path) => {
                for p in &path {
                    if self.tiles[p.index()] == Tile::Stone {
                        self.set(*p, Tile::Corridor);
                    }
                }
                self.corridors.push(path);
                true
            }
            None => false,
        }
    }

    fn place_door(&mut self, rng: &mut StreamRng, r: &Room, side: Side, cfg: &GenConfig) -> Pos {
        let candidate = |rng: &mut StreamRng| match side {
            Side::Left => Pos::new(r.x - 1, rng.random_range(r.y..r.y + r.h)),
            Side::Right => Pos::new(r.x + r.w, rng.random_range(r.y..r.y + r.h)),
            Side::Top => Pos::new(rng.random_range(r.x..r.x + r.w), r.y - 1),
            Side::Bottom => Pos::new(rng.random_range(r.x..r.x + r.w), r.y + r.h),
        };
        let mut pos = candidate(rng);
        for _ in 0..20 {
            let existing = matches!(self.tiles[pos.index()], Tile::Door { .. });
            let crowded = pos
                .neighbors4()
                .any(|q| matches!(self.tiles[q.index()], Tile::Door { .. }));
            if existing || !crowded {
                break;
            }
            pos = candidate(rng);
        }
        if matches!(self.tiles[pos.index()], Tile::Door { .. }) {
            return pos;
        }
        let roll: f64 = rng.random();
        let mut acc = 0.0;
        let mut state = DoorState::Hidden;
        for (i, s) in [DoorState::Open, DoorState::Closed, DoorState::Locked, DoorState::Hidden]
            .into_iter()
            .enumerate()
        {
            acc += cfg.door_odds[i];
            if roll < acc {
                state = s;
                break;
            }
        }
        let in_vertical_wall = matches!(side, Side::Left | Side::Right);
        self.set(
            pos,
            Tile::Door {
                state,
                in_vertical_wall,
            },
        );
        self.doors.push(DoorSpec {
            pos,
            state,
            in_vertical_wall,
        });
        pos
    }

    fn blocked(&self, p: Pos) -> bool {
        !p.in_bounds() || self.rooms.iter().any(|r| r.box_contains(p))
    }

    /// L-shaped path if one is clear, else the shortest 4-connected path
    /// around room boxes.
    fn dig(&self, start: Pos, end: Pos) -> Option<Vec<Pos>> {
        if self.blocked(start) || self.blocked(end) {
            return None;
        }
        for horizontal_first in [true, false] {
            let path = l_path(start, end, horizontal_first);
            if path.iter().all(|p| !self.blocked(*p)) {
                return Some(path);
            }
        }
        let mut prev = vec![usize::MAX; MAP_TILES];
        let mut queue = VecDeque::new();
        prev[start.index()] = start.index();
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            if p == end {
                let mut path = vec![end];
                let mut i = end.index();
                while i != start.index() {
                    i = prev[i];
                    path.push(Pos::from_index(i));
                }
                path.reverse();
                return Some(path);
            }
            for q in p.neighbors4() {
                if prev[q.index()] == usize::MAX && !self.blocked(q) {
                    prev[q.index()] = p.index();
                    queue.push_back(q);
                }
            }
        }
        None
    }
}

fn outside(door: Pos, side: Side) -> Pos {
    match side {
        Side::Left => door.offset(-1, 0),
        Side::Right => door.offset(1, 0),
        Side::Top => door.offset(0, -1),
        Side::Bottom => door.offset(0, 1),
    }
}

fn l_path(start: Pos, end: Pos, horizontal_first: bool) -> Vec<Pos> {
    let mut path = vec![start];
    let mut cur = start;
    let step = |a: i32, b: i32| (b - a).signum();
    let mut walk = |cur: &mut Pos, horizontal: bool| {
        if horizontal {
            while cur.x != end.x {
                cur.x += step(cur.x, end.x);
                path.push(*cur);
            }
        } else {
            while cur.y != end.y {
                cur.y += step(cur.y, end.y);
                path.push(*cur);
            }
        }
    };
    walk(&mut cur, horizontal_first);
    walk(&mut cur, !horizontal_first);
    path
}

/// Gold piles and food for a level, drawn from the depth's item stream.
pub fn place_items(game_seed: u64, bp: &LevelBlueprint) -> Vec<(Pos, FloorObject)> {
    let mut rng = rng::stream(game_seed, StreamKind::ItemPlacement, bp.depth as u64);
    let mut taken: Vec<Pos> = bp
        .staircase_up
        .into_iter()
        .chain(bp.staircase_down)
        .chain(bp.hero_start)
        .chain(bp.oracle)
        .chain(bp.boulders.iter().copied())
        .chain(bp.traps.iter().map(|t| t.pos))
        .collect();
    let mut out = Vec::new();
    let depth = bp.depth;
    for room in &bp.rooms {
        if rng.random_bool(1.0 / 3.0) {
            let amount = rng.random_range(1..=depth + 2) * rng.random_range(1..=30);
            if let Some(p) = random_free_tile(&mut rng, room, &taken) {
                taken.push(p);
                out.push((p, FloorObject::Gold(amount)));
            }
        }
        if rng.random_bool(1.0 / 6.0) {
            let kind = ItemKind::FOODS[rng.random_range(0..ItemKind::FOODS.len())];
            if let Some(p) = random_free_tile(&mut rng, room, &taken) {
                taken.push(p);
                out.push((p, FloorObject::Item(Item::new(kind, 1))));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RoomOutOfBounds(usize),
    RoomsOverlap(usize, usize),
    FeatureOutOfBounds(Pos),
    StaircaseDownCount { found: usize, expected: usize },
    StaircaseUpCount { found: usize, expected: usize },
    MissingHeroStart,
    HeroStartOutsideRoom(Pos),
    UnreachableRoom(usize),
    UnreachableStaircase(Pos),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the blueprint invariants and reachability, treating hidden and
/// locked doors as passable.
pub fn validate_level(bp: &LevelBlueprint, max_depth: u32) -> ValidationReport {
    let mut v = Vec::new();
    for (i, r) in bp.rooms.iter().enumerate() {
        let inside = r.x > 0
            && r.y > 0
            && r.x + r.w < MAP_WIDTH as i32
            && r.y + r.h < MAP_HEIGHT as i32
            && r.w > 0
            && r.h > 0;
        if !inside {
            v.push(Violation::RoomOutOfBounds(i));
        }
        for (j, o) in bp.rooms.iter().enumerate().skip(i + 1) {
            if r.overlaps(o) {
                v.push(Violation::RoomsOverlap(i, j));
            }
        }
    }
    let features = bp
        .doors
        .iter()
        .map(|d| d.pos)
        .chain(bp.traps.iter().map(|t| t.pos))
        .chain(bp.boulders.iter().copied())
        .chain(bp.staircase_up)
        .chain(bp.staircase_down)
        .chain(bp.hero_start)
        .chain(bp.oracle)
        .chain(bp.corridors.iter().flatten().copied());
    for p in features {
        if !p.in_bounds() {
            v.push(Violation::FeatureOutOfBounds(p));
        }
    }
    if bp.tiles.len() != MAP_TILES {
        v.push(Violation::FeatureOutOfBounds(Pos::from_index(bp.tiles.len())));
        return ValidationReport { violations: v };
    }

    let downs: Vec<Pos> = stairs(bp, Tile::StairsDown);
    let ups: Vec<Pos> = stairs(bp, Tile::StairsUp);
    let expected_down = usize::from(bp.depth < max_depth);
    let expected_up = usize::from(bp.depth > 1);
    if downs.len() != expected_down {
        v.push(Violation::StaircaseDownCount {
            found: downs.len(),
            expected: expected_down,
        });
    }
    if ups.len() != expected_up {
        v.push(Violation::StaircaseUpCount {
            found: ups.len(),
            expected: expected_up,
        });
    }

    let start = if bp.depth == 1 {
        match bp.hero_start {
            None => {
                v.push(Violation::MissingHeroStart);
                None
            }
            Some(p) => {
                if !bp.rooms.iter().any(|r| r.contains(p)) {
                    v.push(Violation::HeroStartOutsideRoom(p));
                }
                Some(p)
            }
        }
    } else {
        ups.first().copied()
    };

    if let Some(start) = start.filter(|p| p.in_bounds()) {
        let reach = flood(bp, start);
        for (i, r) in bp.rooms.iter().enumerate() {
            if !r.tiles().any(|p| p.in_bounds() && reach[p.index()]) {
                v.push(Violation::UnreachableRoom(i));
            }
        }
        for p in downs.iter().chain(ups.iter()) {
            if !reach[p.index()] {
                v.push(Violation::UnreachableStaircase(*p));
            }
        }
    }
    ValidationReport { violations: v }
}

fn stairs(bp: &LevelBlueprint, kind: Tile) -> Vec<Pos> {
    bp.tiles
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == kind)
        .map(|(i, _)| Pos::from_index(i))
        .collect()
}

fn flood(bp: &LevelBlueprint, start: Pos) -> Vec<bool> {
    let passable = |t: Tile| {
        matches!(
            t,
            Tile::Floor | Tile::Corridor | Tile::Door { .. } | Tile::StairsUp | Tile::StairsDown
        )
    };
    let mut seen = vec![false; MAP_TILES];
    let mut queue = VecDeque::from([start]);
    seen[start.index()] = true;
    while let Some(p) = queue.pop_front() {
        for q in p.neighbors4() {
            if !seen[q.index()] && passable(bp.tiles[q.index()]) {
                seen[q.index()] = true;
                queue.push_back(q);
            }
        }
    }
    seen
}
