//! Monster species and item kinds shared by the generator, engine and renderer.

use serde::{Deserialize, Serialize};

use crate::glyph::{self, GlyphId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Species {
    Jackal,
    SewerRat,
    Newt,
    Kobold,
    AcidBlob,
    Hobgoblin,
    GiantAnt,
    GnomeLord,
    Wolf,
    GnomeKing,
    LittleDog,
    Kitten,
    Oracle,
}

impl Species {
    pub const ALL: [Species; 13] = [
        Species::Jackal,
        Species::SewerRat,
        Species::Newt,
        Species::Kobold,
        Species::AcidBlob,
        Species::Hobgoblin,
        Species::GiantAnt,
        Species::GnomeLord,
        Species::Wolf,
        Species::GnomeKing,
        Species::LittleDog,
        Species::Kitten,
        Species::Oracle,
    ];

    /// Species that may be spawned as hostiles.
    pub const HOSTILE: [Species; 10] = [
        Species::Jackal,
        Species::SewerRat,
        Species::Newt,
        Species::Kobold,
        Species::AcidBlob,
        Species::Hobgoblin,
        Species::GiantAnt,
        Species::GnomeLord,
        Species::Wolf,
        Species::GnomeKing,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Species::Jackal => "jackal",
            Species::SewerRat => "sewer rat",
            Species::Newt => "newt",
            Species::Kobold => "kobold",
            Species::AcidBlob => "acid blob",
            Species::Hobgoblin => "hobgoblin",
            Species::GiantAnt => "giant ant",
            Species::GnomeLord => "gnome lord",
            Species::Wolf => "wolf",
            Species::GnomeKing => "gnome king",
            Species::LittleDog => "little dog",
            Species::Kitten => "kitten",
            Species::Oracle => "oracle",
        }
    }

    pub fn from_key(key: &str) -> Option<Species> {
        Species::ALL.into_iter().find(|s| s.key() == key)
    }

    pub fn glyph(self) -> GlyphId {
        match self {
            Species::LittleDog => glyph::PET_LITTLE_DOG,
            Species::Kitten => glyph::PET_KITTEN,
            Species::Oracle => glyph::MON_ORACLE,
            s => GlyphId(glyph::MON_JACKAL.0 + s as u16),
        }
    }

    pub fn corpse_glyph(self) -> Option<GlyphId> {
        match self {
            Species::Oracle => None,
            s => Some(GlyphId(glyph::CORPSE_JACKAL.0 + s as u16)),
        }
    }

    pub fn is_pet_species(self) -> bool {
        matches!(self, Species::LittleDog | Species::Kitten)
    }
}

/// Object class ids as exposed in `inv_oclasses`.
pub mod oclass {
    pub const WEAPON: u8 = 2;
    pub const ARMOR: u8 = 3;
    pub const FOOD: u8 = 7;
    pub const COIN: u8 = 12;
    pub const ROCK: u8 = 14;
    /// Padding value for empty inventory slots.
    pub const MAXOCLASSES: u8 = 18;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    Corpse(Species),
    FoodRation,
    CramRation,
    LembasWafer,
    Apple,
    Orange,
    Carrot,
    FortuneCookie,
    LongSword,
    Dagger,
    Quarterstaff,
    LeatherArmor,
}

impl ItemKind {
    pub const FOODS: [ItemKind; 7] = [
        ItemKind::FoodRation,
        ItemKind::CramRation,
        ItemKind::LembasWafer,
        ItemKind::Apple,
        ItemKind::Orange,
        ItemKind::Carrot,
        ItemKind::FortuneCookie,
    ];

    pub const NON_CORPSE: [ItemKind; 11] = [
        ItemKind::FoodRation,
        ItemKind::CramRation,
        ItemKind::LembasWafer,
        ItemKind::Apple,
        ItemKind::Orange,
        ItemKind::Carrot,
        ItemKind::FortuneCookie,
        ItemKind::LongSword,
        ItemKind::Dagger,
        ItemKind::Quarterstaff,
        ItemKind::LeatherArmor,
    ];

    /// Registry key; also the key used by the config tables.
    pub fn key(self) -> &'static str {
        match self {
            ItemKind::Corpse(_) => "corpse",
            ItemKind::FoodRation => "food ration",
            ItemKind::CramRation => "cram ration",
            ItemKind::LembasWafer => "lembas wafer",
            ItemKind::Apple => "apple",
            ItemKind::Orange => "orange",
            ItemKind::Carrot => "carrot",
            ItemKind::FortuneCookie => "fortune cookie",
            ItemKind::LongSword => "long sword",
            ItemKind::Dagger => "dagger",
            ItemKind::Quarterstaff => "quarterstaff",
            ItemKind::LeatherArmor => "leather armor",
        }
    }

    pub fn from_key(key: &str) -> Option<ItemKind> {
        ItemKind::NON_CORPSE.into_iter().find(|k| k.key() == key)
    }

    pub fn glyph(self) -> GlyphId {
        match self {
            ItemKind::Corpse(s) => s.corpse_glyph().unwrap_or(glyph::CORPSE_JACKAL),
            ItemKind::FoodRation => glyph::FOOD_RATION,
            ItemKind::CramRation => glyph::CRAM_RATION,
            ItemKind::LembasWafer => glyph::LEMBAS_WAFER,
            ItemKind::Apple => glyph::APPLE,
            ItemKind::Orange => glyph::ORANGE_FRUIT,
            ItemKind::Carrot => glyph::CARROT,
            ItemKind::FortuneCookie => glyph::FORTUNE_COOKIE,
            ItemKind::LongSword => glyph::LONG_SWORD,
            ItemKind::Dagger => glyph::DAGGER,
            ItemKind::Quarterstaff => glyph::QUARTERSTAFF,
            ItemKind::LeatherArmor => glyph::LEATHER_ARMOR,
        }
    }

    pub fn oclass(self) -> u8 {
        match self {
            ItemKind::LongSword | ItemKind::Dagger | ItemKind::Quarterstaff => oclass::WEAPON,
            ItemKind::LeatherArmor => oclass::ARMOR,
            _ => oclass::FOOD,
        }
    }

    pub fn is_edible(self) -> bool {
        self.oclass() == oclass::FOOD
    }

    /// Corpses never stack; everything else merges by kind.
    pub fn stacks(self) -> bool {
        !matches!(self, ItemKind::Corpse(_))
    }

    pub fn describe(self, quantity: u32) -> String {
        let name = match self {
            ItemKind::Corpse(s) => format!("{} corpse", s.key()),
            k => k.key().to_string(),
        };
        if quantity == 1 {
            let article = if name.starts_with(['a', 'e', 'i', 'o', 'u']) {
                "an"
            } else {
                "a"
            };
            format!("{article} {name}")
        } else {
            let plural = match self {
                ItemKind::LeatherArmor => "sets of leather armor".to_string(),
                ItemKind::FoodRation => "food rations".to_string(),
                ItemKind::CramRation => "cram rations".to_string(),
                ItemKind::LembasWafer => "lembas wafers".to_string(),
                ItemKind::FortuneCookie => "fortune cookies".to_string(),
                ItemKind::LongSword => "long swords".to_string(),
                ItemKind::Quarterstaff => "quarterstaves".to_string(),
                _ => format!("{name}s"),
            };
            format!("{quantity} {plural}")
        }
    }
}

/// One stack of items, on the floor or in the inventory.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Item {
    pub kind: ItemKind,
    pub quantity: u32,
    /// Turn the item came into existence; only meaningful for corpses.
    pub created_turn: u64,
}

impl Item {
    pub fn new(kind: ItemKind, quantity: u32) -> Self {
        Item {
            kind,
            quantity,
            created_turn: 0,
        }
    }

    pub fn corpse(species: Species, turn: u64) -> Self {
        Item {
            kind: ItemKind::Corpse(species),
            quantity: 1,
            created_turn: turn,
        }
    }
}

/// Something lying on the dungeon floor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FloorObject {
    Item(Item),
    Gold(u32),
}

impl FloorObject {
    pub fn glyph(&self) -> GlyphId {
        match self {
            FloorObject::Item(it) => it.kind.glyph(),
            FloorObject::Gold(_) => glyph::GOLD_PILE,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FloorObject::Item(it) => it.kind.describe(it.quantity),
            FloorObject::Gold(1) => "1 gold piece".to_string(),
            FloorObject::Gold(n) => format!("{n} gold pieces"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyph::glyph_info;

    #[test]
    fn species_glyphs_match_registry_keys() {
        for s in Species::ALL {
            assert_eq!(glyph_info(s.glyph()).unwrap().entity_kind, s.key());
            if let Some(c) = s.corpse_glyph() {
                assert_eq!(
                    glyph_info(c).unwrap().entity_kind,
                    format!("{} corpse", s.key())
                );
            }
        }
    }

    #[test]
    fn item_glyphs_match_registry_keys() {
        for k in ItemKind::NON_CORPSE {
            assert_eq!(glyph_info(k.glyph()).unwrap().entity_kind, k.key());
            assert_eq!(ItemKind::from_key(k.key()), Some(k));
        }
    }

    #[test]
    fn descriptions() {
        assert_eq!(ItemKind::Apple.describe(1), "an apple");
        assert_eq!(ItemKind::FoodRation.describe(3), "3 food rations");
        assert_eq!(
            ItemKind::Corpse(Species::Kobold).describe(1),
            "a kobold corpse"
        );
    }
}
