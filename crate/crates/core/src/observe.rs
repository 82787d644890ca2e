//! Fog-of-war rendering of a [`GameState`] into fixed-shape observation arrays.
//!
//! The flat byte form of an [`Observation`] is described by the `LAYOUT` file
//! shipped in `data/`; [`layout_text`] generates it and a test keeps the two in
//! sync.

use std::hash::Hasher;

use crate::dungeon::{Pos, Tile, MAP_HEIGHT, MAP_TILES, MAP_WIDTH};
use crate::engine::{GameState, Level};
use crate::entity::oclass;
use crate::error::ObserveError;
use crate::glyph::{self, GlyphId, MAX_GLYPH};

pub const BLSTATS_LEN: usize = 25;
pub const MESSAGE_LEN: usize = 256;
pub const INV_SLOTS: usize = 55;
pub const INV_STR_LEN: usize = 80;
/// Message symbol used for padding; printable ASCII maps to `0..=94`.
pub const MESSAGE_PAD: u8 = 95;
/// Bit set in `specials` on the tile holding the hero's pet.
pub const SPECIAL_PET: u8 = 1;
pub const LAYOUT_VERSION: u32 = 1;

/// Positions inside `blstats`.
pub mod bl {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const STRENGTH_PERCENTAGE: usize = 2;
    pub const STRENGTH: usize = 3;
    pub const DEXTERITY: usize = 4;
    pub const CONSTITUTION: usize = 5;
    pub const INTELLIGENCE: usize = 6;
    pub const WISDOM: usize = 7;
    pub const CHARISMA: usize = 8;
    pub const SCORE: usize = 9;
    pub const HITPOINTS: usize = 10;
    pub const MAX_HITPOINTS: usize = 11;
    pub const DEPTH: usize = 12;
    pub const GOLD: usize = 13;
    pub const ENERGY: usize = 14;
    pub const MAX_ENERGY: usize = 15;
    pub const ARMOR_CLASS: usize = 16;
    pub const MONSTER_LEVEL: usize = 17;
    pub const EXPERIENCE_LEVEL: usize = 18;
    pub const EXPERIENCE_POINTS: usize = 19;
    pub const TIME: usize = 20;
    pub const HUNGER_STATE: usize = 21;
    pub const CARRYING_CAPACITY: usize = 22;
    pub const DUNGEON_NUMBER: usize = 23;
    pub const LEVEL_NUMBER: usize = 24;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileVisibility {
    Unseen,
    Remembered,
    Visible,
}

/// Per-level fog of war with the glyph last seen on each tile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VisibilityMap {
    state: Vec<TileVisibility>,
    memory: Vec<GlyphId>,
    seen: usize,
}

impl Default for VisibilityMap {
    fn default() -> Self {
        Self::new()
    }
}

impl VisibilityMap {
    pub fn new() -> Self {
        VisibilityMap {
            state: vec![TileVisibility::Unseen; MAP_TILES],
            memory: vec![glyph::UNEXPLORED; MAP_TILES],
            seen: 0,
        }
    }

    pub fn get(&self, p: Pos) -> TileVisibility {
        self.state[p.index()]
    }

    pub fn is_visible(&self, p: Pos) -> bool {
        self.state[p.index()] == TileVisibility::Visible
    }

    pub fn remembered_glyph(&self, p: Pos) -> GlyphId {
        self.memory[p.index()]
    }

    /// Tiles that are visible or remembered.
    pub fn seen_count(&self) -> usize {
        self.seen
    }

    pub fn unseen_count(&self) -> usize {
        MAP_TILES - self.seen
    }

    /// Demotes everything visible to remembered, then marks `visible` with
    /// their current glyphs.
    pub fn update(&mut self, visible: &[usize], glyphs: &[(usize, GlyphId)]) {
        for s in self.state.iter_mut() {
            if *s == TileVisibility::Visible {
                *s = TileVisibility::Remembered;
            }
        }
        for &i in visible {
            if self.state[i] == TileVisibility::Unseen {
                self.seen += 1;
            }
            self.state[i] = TileVisibility::Visible;
        }
        for &(i, g) in glyphs {
            self.memory[i] = g;
        }
    }
}

/// Indices of the tiles the hero can see.
///
/// Inside a lit room the whole room, walls and doorways included, is in view.
/// Standing in a doorway also shows any lit room the door belongs to. The
/// eight neighbors are always visible.
pub fn compute_fov(level: &Level, hero: Pos) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(128);
    let is_door = matches!(level.tile(hero), Tile::Door { .. });
    for room in level.rooms.iter().filter(|r| r.lit) {
        if room.contains(hero) || (is_door && room.box_contains(hero)) {
            for y in room.y - 1..=room.y + room.h {
                for x in room.x - 1..=room.x + room.w {
                    let p = Pos::new(x, y);
                    if p.in_bounds() {
                        out.push(p.index());
                    }
                }
            }
        }
    }
    out.push(hero.index());
    out.extend(hero.neighbors8().map(|p| p.index()));
    out.sort_unstable();
    out.dedup();
    out
}

/// The observation arrays. Buffers are allocated once and reused by [`render_into`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub glyphs: Vec<i16>,
    pub chars: Vec<u8>,
    pub colors: Vec<u8>,
    pub specials: Vec<u8>,
    pub blstats: [i32; BLSTATS_LEN],
    pub message: Vec<u8>,
    pub inv_glyphs: Vec<i16>,
    pub inv_strs: Vec<u8>,
    pub inv_letters: Vec<u8>,
    pub inv_oclasses: Vec<u8>,
}

impl Default for Observation {
    fn default() -> Self {
        Self::new()
    }
}

impl Observation {
    pub fn new() -> Self {
        Observation {
            glyphs: vec![glyph::UNEXPLORED.0 as i16; MAP_TILES],
            chars: vec![b' '; MAP_TILES],
            colors: vec![0; MAP_TILES],
            specials: vec![0; MAP_TILES],
            blstats: [0; BLSTATS_LEN],
            message: vec![MESSAGE_PAD; MESSAGE_LEN],
            inv_glyphs: vec![MAX_GLYPH as i16; INV_SLOTS],
            inv_strs: vec![0; INV_SLOTS * INV_STR_LEN],
            inv_letters: vec![0; INV_SLOTS],
            inv_oclasses: vec![oclass::MAXOCLASSES; INV_SLOTS],
        }
    }

    pub fn glyph_at(&self, p: Pos) -> i16 {
        self.glyphs[p.index()]
    }

    /// Rendered map as 21 lines of text.
    pub fn ascii(&self) -> String {
        let mut s = String::with_capacity(MAP_TILES + MAP_HEIGHT);
        for row in self.chars.chunks(MAP_WIDTH) {
            s.extend(row.iter().map(|&c| c as char));
            s.push('\n');
        }
        s
    }

    /// The message decoded back to text.
    pub fn message_text(&self) -> String {
        self.message
            .iter()
            .take_while(|&&b| b != MESSAGE_PAD)
            .map(|&b| (b + 32) as char)
            .collect()
    }

    /// 64-bit FNV-1a over chars then colors.
    pub fn frame_hash(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        h.write(&self.chars);
        h.write(&self.colors);
        h.finish()
    }

    /// Serializes into `buf` following the layout; `buf` is cleared first.
    /// Writes the flat layout into the first `FLAT_SIZE` bytes of `buf`.
    ///
    /// # Panics
    /// If `buf` is shorter than `FLAT_SIZE`.
    pub fn write_flat(&self, buf: &mut [u8]) {
        assert!(buf.len() >= FLAT_SIZE, "flat buffer too small");
        let mut at = 0;
        let mut put = |bytes: &[u8]| {
            buf[at..at + bytes.len()].copy_from_slice(bytes);
            at += bytes.len();
        };
        for g in &self.glyphs {
            put(&g.to_le_bytes());
        }
        put(&self.chars);
        put(&self.colors);
        put(&self.specials);
        for v in &self.blstats {
            put(&v.to_le_bytes());
        }
        put(&self.message);
        for g in &self.inv_glyphs {
            put(&g.to_le_bytes());
        }
        put(&self.inv_strs);
        put(&self.inv_letters);
        put(&self.inv_oclasses);
    }

    pub fn to_flat(&self) -> Vec<u8> {
        let mut v = vec![0; FLAT_SIZE];
        self.write_flat(&mut v);
        v
    }
}

/// Data type of a layout field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    I16,
    U8,
    I32,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I16 => 2,
            Dtype::I32 => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::I16 => "i16",
            Dtype::I32 => "i32",
        }
    }

    fn parse(s: &str) -> Option<Dtype> {
        match s {
            "u8" => Some(Dtype::U8),
            "i16" => Some(Dtype::I16),
            "i32" => Some(Dtype::I32),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutField {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Inclusive value bounds; `None` for unbounded integer stats.
    pub bounds: Option<(i64, i64)>,
}

impl LayoutField {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> usize {
        self.len() * self.dtype.width()
    }
}

pub fn layout_fields() -> Vec<LayoutField> {
    let max_glyph = MAX_GLYPH as i64;
    type Row = (&'static str, Dtype, Vec<usize>, Option<(i64, i64)>);
    let spec: [Row; 10] = [
        ("glyphs", Dtype::I16, vec![MAP_HEIGHT, MAP_WIDTH], Some((0, max_glyph))),
        ("chars", Dtype::U8, vec![MAP_HEIGHT, MAP_WIDTH], Some((0, 127))),
        ("colors", Dtype::U8, vec![MAP_HEIGHT, MAP_WIDTH], Some((0, 15))),
        ("specials", Dtype::U8, vec![MAP_HEIGHT, MAP_WIDTH], Some((0, 255))),
        ("blstats", Dtype::I32, vec![BLSTATS_LEN], None),
        ("message", Dtype::U8, vec![MESSAGE_LEN], Some((0, MESSAGE_PAD as i64))),
        ("inv_glyphs", Dtype::I16, vec![INV_SLOTS], Some((0, max_glyph))),
        ("inv_strs", Dtype::U8, vec![INV_SLOTS, INV_STR_LEN], Some((0, 127))),
        ("inv_letters", Dtype::U8, vec![INV_SLOTS], Some((0, 127))),
        ("inv_oclasses", Dtype::U8, vec![INV_SLOTS], Some((0, oclass::MAXOCLASSES as i64))),
    ];
    let mut offset = 0;
    spec.into_iter()
        .map(|(name, dtype, shape, bounds)| {
            let f = LayoutField {
                name: name.to_string(),
                dtype,
                shape,
                offset,
                bounds,
            };
            offset += f.byte_len();
            f
        })
        .collect()
}

/// Size in bytes of one flat observation.
pub const FLAT_SIZE: usize = MAP_TILES * 2 + MAP_TILES * 3 + BLSTATS_LEN * 4 + MESSAGE_LEN + INV_SLOTS * 2 + INV_SLOTS * INV_STR_LEN + INV_SLOTS * 2;

/// Text of the `LAYOUT` file.
pub fn layout_text() -> String {
    let mut s = String::new();
    s.push_str("# Flat observation buffer. Little-endian, row-major, fields packed in order, no padding.\n");
    s.push_str("# columns: field name, dtype, shape, byte offset, byte length, min, max\n");
    s.push_str(&format!("version {LAYOUT_VERSION}\n"));
    s.push_str(&format!("size {FLAT_SIZE}\n"));
    for f in layout_fields() {
        let shape = f
            .shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let (lo, hi) = match f.bounds {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => ("-".to_string(), "-".to_string()),
        };
        s.push_str(&format!(
            "field {} {} {} {} {} {} {}\n",
            f.name,
            f.dtype.as_str(),
            shape,
            f.offset,
            f.byte_len(),
            lo,
            hi
        ));
    }
    s
}

/// Layout as parsed from a `LAYOUT` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub version: u32,
    pub size: usize,
    pub fields: Vec<LayoutField>,
}

impl Layout {
    pub fn field(&self, name: &str) -> Option<&LayoutField> {
        self.fields.iter().find(|f| f.name == name)
    }
}

pub fn parse_layout(text: &str) -> Result<Layout, ObserveError> {
    let bad = |line: &str| ObserveError::Layout(format!("bad line {line:?}"));
    let mut version = None;
    let mut size = None;
    let mut fields = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["version", v] => version = Some(v.parse().map_err(|_| bad(line))?),
            ["size", v] => size = Some(v.parse().map_err(|_| bad(line))?),
            ["field", name, dtype, shape, offset, bytes, lo, hi] => {
                let dtype = Dtype::parse(dtype).ok_or_else(|| bad(line))?;
                let shape = shape
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad(line))?;
                let bounds = match (*lo, *hi) {
                    ("-", "-") => None,
                    (lo, hi) => Some((
                        lo.parse().map_err(|_| bad(line))?,
                        hi.parse().map_err(|_| bad(line))?,
                    )),
                };
                let f = LayoutField {
                    name: name.to_string(),
                    dtype,
                    shape,
                    offset: offset.parse().map_err(|_| bad(line))?,
                    bounds,
                };
                if f.byte_len() != bytes.parse::<usize>().map_err(|_| bad(line))? {
                    return Err(ObserveError::Layout(format!("field {name}: byte length disagrees with shape")));
                }
                fields.push(f);
            }
            _ => return Err(bad(line)),
        }
    }
    let version = version.ok_or_else(|| ObserveError::Layout("missing version".into()))?;
    if version != LAYOUT_VERSION {
        return Err(ObserveError::Layout(format!(
            "version {version} does not match {LAYOUT_VERSION}"
        )));
    }
    Ok(Layout {
        version,
        size: size.ok_or_else(|| ObserveError::Layout("missing size".into()))?,
        fields,
    })
}

/// Hero position followed by the 23 bottom-line stats.
pub fn encode_blstats(state: &GameState) -> [i32; BLSTATS_LEN] {
    let h = state.hero();
    let mut b = [0i32; BLSTATS_LEN];
    b[bl::X] = h.pos.x;
    b[bl::Y] = h.pos.y;
    b[bl::STRENGTH_PERCENTAGE] = h.strength_percentage;
    b[bl::STRENGTH] = h.strength;
    b[bl::DEXTERITY] = h.dexterity;
    b[bl::CONSTITUTION] = h.constitution;
    b[bl::INTELLIGENCE] = h.intelligence;
    b[bl::WISDOM] = h.wisdom;
    b[bl::CHARISMA] = h.charisma;
    b[bl::SCORE] = clamp_i32(state.score());
    b[bl::HITPOINTS] = h.hitpoints.max(0);
    b[bl::MAX_HITPOINTS] = h.max_hitpoints;
    b[bl::DEPTH] = state.depth() as i32;
    b[bl::GOLD] = clamp_i32(h.gold as i64);
    b[bl::ENERGY] = h.energy;
    b[bl::MAX_ENERGY] = h.max_energy;
    b[bl::ARMOR_CLASS] = h.armor_class;
    b[bl::MONSTER_LEVEL] = h.experience_level;
    b[bl::EXPERIENCE_LEVEL] = h.experience_level;
    b[bl::EXPERIENCE_POINTS] = clamp_i32(h.experience_points);
    b[bl::TIME] = clamp_i32(state.turn() as i64);
    b[bl::HUNGER_STATE] = state.hunger_state() as i32;
    b[bl::CARRYING_CAPACITY] = 0;
    b[bl::DUNGEON_NUMBER] = 0;
    b[bl::LEVEL_NUMBER] = state.depth() as i32;
    b
}

fn clamp_i32(v: i64) -> i32 {
    v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

/// Encodes text into the 96-symbol message alphabet, padded to 256.
pub fn encode_message(text: &str, out: &mut [u8]) {
    out.fill(MESSAGE_PAD);
    for (slot, b) in out.iter_mut().zip(text.bytes()) {
        *slot = if (32..=126).contains(&b) { b - 32 } else { 0 };
    }
}

/// `k`×`k` window of `glyphs` centered on `center`; off-map cells hold the sentinel.
pub fn crop_glyphs(glyphs: &[i16], center: Pos, k: usize) -> Result<Vec<i16>, ObserveError> {
    if k.is_multiple_of(2) {
        return Err(ObserveError::EvenCropSize(k));
    }
    if !center.in_bounds() {
        return Err(ObserveError::CenterOffMap {
            x: center.x,
            y: center.y,
        });
    }
    let r = (k / 2) as i32;
    let mut out = Vec::with_capacity(k * k);
    for dy in -r..=r {
        for dx in -r..=r {
            let p = center.offset(dx, dy);
            out.push(if p.in_bounds() {
                glyphs[p.index()]
            } else {
                MAX_GLYPH as i16
            });
        }
    }
    Ok(out)
}

pub fn render_observation(state: &GameState) -> Observation {
    let mut obs = Observation::new();
    render_into(state, &mut obs);
    obs
}

/// Renders into existing buffers without allocating.
pub fn render_into(state: &GameState, obs: &mut Observation) {
    let level = state.level();
    let vision = &level.vision;
    let pet = state.pet_here().map(|p| (p.pos, p.species.glyph()));
    let hero = state.hero().pos;
    for i in 0..MAP_TILES {
        let p = Pos::from_index(i);
        let g = match vision.get(p) {
            TileVisibility::Unseen => glyph::UNEXPLORED,
            TileVisibility::Remembered => match vision.remembered_glyph(p) {
                glyph::FLOOR_LIT => glyph::FLOOR_REMEMBERED,
                g => g,
            },
            TileVisibility::Visible => {
                if p == hero {
                    glyph::HERO
                } else if let Some(m) = level.monsters.iter().find(|m| m.pos == p) {
                    m.species.glyph()
                } else if pet.is_some_and(|(pp, _)| pp == p) {
                    pet.map(|(_, g)| g).unwrap_or(glyph::HERO)
                } else {
                    level.object_glyph(p)
                }
            }
        };
        let (c, col) = glyph::char_and_color(g);
        obs.glyphs[i] = g.0 as i16;
        obs.chars[i] = c;
        obs.colors[i] = col;
        obs.specials[i] = 0;
    }
    if let Some((pp, _)) = pet {
        if vision.is_visible(pp) {
            obs.specials[pp.index()] = SPECIAL_PET;
        }
    }
    obs.blstats = encode_blstats(state);
    encode_message(state.message(), &mut obs.message);

    obs.inv_glyphs.fill(MAX_GLYPH as i16);
    obs.inv_strs.fill(0);
    obs.inv_letters.fill(0);
    obs.inv_oclasses.fill(oclass::MAXOCLASSES);
    for (i, slot) in state.inventory().iter().take(INV_SLOTS).enumerate() {
        obs.inv_glyphs[i] = slot.item.kind.glyph().0 as i16;
        obs.inv_letters[i] = slot.letter;
        obs.inv_oclasses[i] = slot.item.kind.oclass();
        let desc = slot.item.kind.describe(slot.item.quantity);
        let row = &mut obs.inv_strs[i * INV_STR_LEN..(i + 1) * INV_STR_LEN];
        for (dst, b) in row.iter_mut().zip(desc.bytes().take(INV_STR_LEN - 1)) {
            *dst = b;
        }
    }
}
