//! The glyph registry: every displayable entity, its id, ASCII character and color.
//!
//! Ids are dense in `[0, MAX_GLYPH)`. `MAX_GLYPH` itself is the padding sentinel
//! used by the observation arrays and maps to no entity.

use std::fmt;

use crate::error::GlyphError;

/// Version tag written at the top of the shipped registry table.
pub const REGISTRY_VERSION: u32 = 1;

/// Integer id of a displayable entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlyphId(pub u16);

/// Terminal colors, numbered as in the classic 16-color curses palette.
pub mod color {
    pub const BLACK: u8 = 0;
    pub const RED: u8 = 1;
    pub const GREEN: u8 = 2;
    pub const BROWN: u8 = 3;
    pub const BLUE: u8 = 4;
    pub const MAGENTA: u8 = 5;
    pub const CYAN: u8 = 6;
    pub const GRAY: u8 = 7;
    pub const ORANGE: u8 = 9;
    pub const YELLOW: u8 = 11;
    pub const BRIGHT_BLUE: u8 = 12;
    pub const WHITE: u8 = 15;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlyphClass {
    Hero,
    PetOverlay,
    Monster,
    Item,
    DungeonFeature,
}

impl GlyphClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GlyphClass::Hero => "hero",
            GlyphClass::PetOverlay => "pet-overlay",
            GlyphClass::Monster => "monster",
            GlyphClass::Item => "item",
            GlyphClass::DungeonFeature => "dungeon-feature",
        }
    }
}

impl fmt::Display for GlyphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphInfo {
    pub display_char: u8,
    pub color: u8,
    pub glyph_class: GlyphClass,
    pub entity_kind: &'static str,
}

use color::*;
use GlyphClass::*;

macro_rules! registry {
    ($( $konst:ident = ($kind:literal, $ch:literal, $color:expr, $class:expr) ),* $(,)?) => {
        const ENTRIES: &[GlyphInfo] = &[
            $( GlyphInfo { display_char: $ch, color: $color, glyph_class: $class, entity_kind: $kind } ),*
        ];
        registry!(@ids 0u16; $( $konst )*);
    };
    (@ids $n:expr; $head:ident $( $tail:ident )*) => {
        pub const $head: GlyphId = GlyphId($n);
        registry!(@ids $n + 1u16; $( $tail )*);
    };
    (@ids $n:expr;) => {
        /// Number of registered glyphs; also the padding sentinel id.
        pub const MAX_GLYPH: u16 = $n;
    };
}

// Order matters: `Species` and `ItemKind` index into the monster, corpse and
// item runs below.
registry! {
    HERO = ("hero", b'@', WHITE, Hero),
    PET_LITTLE_DOG = ("little dog", b'd', WHITE, PetOverlay),
    PET_KITTEN = ("kitten", b'f', WHITE, PetOverlay),
    MON_JACKAL = ("jackal", b'd', BROWN, Monster),
    MON_SEWER_RAT = ("sewer rat", b'r', BROWN, Monster),
    MON_NEWT = ("newt", b':', YELLOW, Monster),
    MON_KOBOLD = ("kobold", b'k', BROWN, Monster),
    MON_ACID_BLOB = ("acid blob", b'b', GREEN, Monster),
    MON_HOBGOBLIN = ("hobgoblin", b'o', GRAY, Monster),
    MON_GIANT_ANT = ("giant ant", b'a', BROWN, Monster),
    MON_GNOME_LORD = ("gnome lord", b'G', BLUE, Monster),
    MON_WOLF = ("wolf", b'd', BROWN, Monster),
    MON_GNOME_KING = ("gnome king", b'G', MAGENTA, Monster),
    MON_ORACLE = ("oracle", b'@', BRIGHT_BLUE, Monster),
    CORPSE_JACKAL = ("jackal corpse", b'%', BROWN, Item),
    CORPSE_SEWER_RAT = ("sewer rat corpse", b'%', BROWN, Item),
    CORPSE_NEWT = ("newt corpse", b'%', YELLOW, Item),
    CORPSE_KOBOLD = ("kobold corpse", b'%', BROWN, Item),
    CORPSE_ACID_BLOB = ("acid blob corpse", b'%', GREEN, Item),
    CORPSE_HOBGOBLIN = ("hobgoblin corpse", b'%', GRAY, Item),
    CORPSE_GIANT_ANT = ("giant ant corpse", b'%', BROWN, Item),
    CORPSE_GNOME_LORD = ("gnome lord corpse", b'%', BLUE, Item),
    CORPSE_WOLF = ("wolf corpse", b'%', BROWN, Item),
    CORPSE_GNOME_KING = ("gnome king corpse", b'%', MAGENTA, Item),
    CORPSE_LITTLE_DOG = ("little dog corpse", b'%', WHITE, Item),
    CORPSE_KITTEN = ("kitten corpse", b'%', WHITE, Item),
    FOOD_RATION = ("food ration", b'%', BROWN, Item),
    CRAM_RATION = ("cram ration", b'%', BROWN, Item),
    LEMBAS_WAFER = ("lembas wafer", b'%', WHITE, Item),
    APPLE = ("apple", b'%', RED, Item),
    ORANGE_FRUIT = ("orange", b'%', ORANGE, Item),
    CARROT = ("carrot", b'%', ORANGE, Item),
    FORTUNE_COOKIE = ("fortune cookie", b'%', YELLOW, Item),
    LONG_SWORD = ("long sword", b')', CYAN, Item),
    DAGGER = ("dagger", b')', CYAN, Item),
    QUARTERSTAFF = ("quarterstaff", b')', BROWN, Item),
    LEATHER_ARMOR = ("leather armor", b'[', BROWN, Item),
    GOLD_PILE = ("gold-pile", b'$', YELLOW, Item),
    BOULDER = ("boulder", b'0', GRAY, Item),
    TRAP = ("trap", b'^', MAGENTA, DungeonFeature),
    UNEXPLORED = ("unexplored", b' ', BLACK, DungeonFeature),
    STONE = ("stone", b' ', BLACK, DungeonFeature),
    WALL_VERTICAL = ("vertical wall", b'|', GRAY, DungeonFeature),
    WALL_HORIZONTAL = ("horizontal wall", b'-', GRAY, DungeonFeature),
    WALL_TOP_LEFT = ("top-left corner", b'-', GRAY, DungeonFeature),
    WALL_TOP_RIGHT = ("top-right corner", b'-', GRAY, DungeonFeature),
    WALL_BOTTOM_LEFT = ("bottom-left corner", b'-', GRAY, DungeonFeature),
    WALL_BOTTOM_RIGHT = ("bottom-right corner", b'-', GRAY, DungeonFeature),
    DOORWAY = ("broken door", b'.', GRAY, DungeonFeature),
    DOOR_OPEN_IN_VERTICAL_WALL = ("open door in vertical wall", b'-', BROWN, DungeonFeature),
    DOOR_OPEN_IN_HORIZONTAL_WALL = ("open door in horizontal wall", b'|', BROWN, DungeonFeature),
    DOOR_CLOSED = ("closed door", b'+', BROWN, DungeonFeature),
    FLOOR_LIT = ("lit floor", b'.', WHITE, DungeonFeature),
    FLOOR_REMEMBERED = ("remembered floor", b'.', GRAY, DungeonFeature),
    CORRIDOR = ("corridor", b'#', GRAY, DungeonFeature),
    STAIRCASE_UP = ("staircase-up", b'<', GRAY, DungeonFeature),
    STAIRCASE_DOWN = ("staircase-down", b'>', GRAY, DungeonFeature),
}

/// Padding sentinel; not a registered entity.
pub const SENTINEL: GlyphId = GlyphId(MAX_GLYPH);

impl GlyphId {
    pub fn is_sentinel(self) -> bool {
        self.0 == MAX_GLYPH
    }
}

/// Looks up the registry entry for a glyph id.
pub fn glyph_info(id: GlyphId) -> Result<GlyphInfo, GlyphError> {
    ENTRIES
        .get(id.0 as usize)
        .copied()
        .ok_or(GlyphError::InvalidGlyph(id.0))
}

/// Inverse of [`glyph_info`] over entity kinds.
pub fn glyph_for(entity_kind: &str) -> Result<GlyphId, GlyphError> {
    ENTRIES
        .iter()
        .position(|e| e.entity_kind == entity_kind)
        .map(|i| GlyphId(i as u16))
        .ok_or_else(|| GlyphError::UnknownEntity(entity_kind.to_string()))
}

/// Unchecked fast path used by the renderer; ids come from the constants above.
#[inline]
pub(crate) fn char_and_color(id: GlyphId) -> (u8, u8) {
    let e = &ENTRIES[id.0 as usize];
    (e.display_char, e.color)
}

/// All registry entries in id order.
pub fn entries() -> impl ExactSizeIterator<Item = (GlyphId, GlyphInfo)> {
    ENTRIES
        .iter()
        .enumerate()
        .map(|(i, e)| (GlyphId(i as u16), *e))
}

/// Renders the registry as the versioned tab-separated table shipped in `data/glyphs.tsv`.
pub fn registry_table() -> String {
    let mut out = format!(
        "# glyph registry v{REGISTRY_VERSION}\n# MAX_GLYPH={MAX_GLYPH}\n# id\tkind\tchar\tcolor\tclass\n"
    );
    for (id, e) in entries() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            id.0, e.entity_kind, e.display_char, e.color, e.glyph_class
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hero_and_staircase_look_right() {
        let hero = glyph_info(HERO).unwrap();
        assert_eq!(hero.display_char, b'@');
        assert_eq!(hero.color, WHITE);
        let down = glyph_info(glyph_for("staircase-down").unwrap()).unwrap();
        assert_eq!(down.display_char, b'>');
        assert_eq!(down.color, GRAY);
    }

    #[test]
    fn sentinel_is_invalid() {
        assert_eq!(
            glyph_info(SENTINEL),
            Err(GlyphError::InvalidGlyph(MAX_GLYPH))
        );
        assert!(glyph_info(GlyphId(MAX_GLYPH + 7)).is_err());
    }

    #[test]
    fn kind_lookup() {
        let gold = glyph_for("gold-pile").unwrap();
        assert_eq!(glyph_info(gold).unwrap().display_char, b'$');
        assert_eq!(
            glyph_info(glyph_for("kitten").unwrap()).unwrap().display_char,
            b'f'
        );
        assert!(matches!(
            glyph_for("medusa"),
            Err(GlyphError::UnknownEntity(k)) if k == "medusa"
        ));
    }

    #[test]
    fn registry_is_a_bijection_with_valid_bounds() {
        for (id, info) in entries() {
            assert!(info.display_char <= 127);
            assert!(info.color <= 15);
            assert_eq!(glyph_for(info.entity_kind).unwrap(), id);
        }
        assert_eq!(entries().len(), MAX_GLYPH as usize);
    }

    #[test]
    fn legend_colors() {
        assert_eq!(glyph_info(GOLD_PILE).unwrap().color, YELLOW);
        assert_eq!(glyph_info(PET_KITTEN).unwrap().color, WHITE);
        assert_eq!(glyph_info(MON_GNOME_LORD).unwrap().color, BLUE);
        assert_eq!(glyph_info(MON_GNOME_KING).unwrap().color, MAGENTA);
    }

    #[test]
    fn shipped_table_matches_registry() {
        let shipped = include_str!("../data/glyphs.tsv");
        assert_eq!(shipped, registry_table());
    }
}
