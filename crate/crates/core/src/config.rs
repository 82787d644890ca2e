//! Versioned plain-text config tables (nutrition, monsters, experience, characters).
//!
//! The built-in tables are compiled in from `data/`. A directory holding the
//! same four files can override them; `DELVE_CONFIG_DIR` is honored by
//! [`ConfigTables::from_env`]. Each table is pinned by the SHA-256 of its text
//! so episode records can detect a config change on replay.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::entity::{ItemKind, Species};
use crate::error::ConfigError;

pub const CONFIG_DIR_ENV: &str = "DELVE_CONFIG_DIR";
pub const TABLE_VERSION: u32 = 1;

const NUTRITION_FILE: &str = "nutrition.toml";
const MONSTERS_FILE: &str = "monsters.toml";
const EXPERIENCE_FILE: &str = "experience.toml";
const CHARACTERS_FILE: &str = "characters.toml";

/// `NdS` dice expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dice {
    pub count: u32,
    pub sides: u32,
}

impl Dice {
    pub const fn new(count: u32, sides: u32) -> Self {
        Dice { count, sides }
    }

    pub fn roll<R: Rng + ?Sized>(self, rng: &mut R) -> i32 {
        if self.sides == 0 {
            return 0;
        }
        (0..self.count)
            .map(|_| rng.random_range(1..=self.sides) as i32)
            .sum()
    }

    pub fn max(self) -> i32 {
        (self.count * self.sides) as i32
    }
}

impl FromStr for Dice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::Invalid(format!("bad dice expression {s:?}"));
        let (n, d) = s.split_once('d').ok_or_else(bad)?;
        Ok(Dice {
            count: n.trim().parse().map_err(|_| bad())?,
            sides: d.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for Dice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}d{}", self.count, self.sides)
    }
}

impl<'de> Deserialize<'de> for Dice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct NutritionTable {
    pub version: u32,
    pub starting_nutrition: i32,
    pub satiated_above: i32,
    pub not_hungry_from: i32,
    pub hungry_from: i32,
    pub weak_from: i32,
    pub corpse_base: i32,
    pub corpse_per_level: i32,
    pub freshness_window: u64,
    pub rotten_poison_probability: f64,
    pub poison_damage: Dice,
    pub acid_damage: Dice,
    food: BTreeMap<String, i32>,
    #[serde(skip)]
    by_kind: HashMap<ItemKind, i32>,
}

impl NutritionTable {
    /// Nutrition of one unit of a non-corpse food, or `None` for inedible kinds.
    pub fn food_value(&self, kind: ItemKind) -> Option<i32> {
        match kind {
            ItemKind::Corpse(_) => None,
            k => self.by_kind.get(&k).copied(),
        }
    }

    pub fn corpse_value(&self, monster_level: i32) -> i32 {
        self.corpse_base + self.corpse_per_level * monster_level
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SpeciesStats {
    pub level: i32,
    pub speed: i32,
    pub armor_class: i32,
    pub damage: Dice,
    pub experience: i64,
    #[serde(default)]
    pub poisonous: bool,
    #[serde(default)]
    pub acidic: bool,
    #[serde(default)]
    pub peaceful: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MonsterTable {
    pub version: u32,
    species: BTreeMap<String, SpeciesStats>,
    #[serde(skip)]
    by_species: Vec<SpeciesStats>,
}

impl MonsterTable {
    pub fn stats(&self, species: Species) -> &SpeciesStats {
        &self.by_species[species as usize]
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperienceTable {
    pub version: u32,
    pub thresholds: Vec<i64>,
    pub hit_dice_per_level: Dice,
}

impl ExperienceTable {
    /// Experience level reached with `points` experience points.
    pub fn level_for(&self, points: i64) -> i32 {
        1 + self.thresholds.iter().take_while(|&&t| points >= t).count() as i32
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct StartingItem {
    pub item: String,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PetChoice {
    Random,
    Kitten,
    LittleDog,
}

impl<'de> Deserialize<'de> for PetField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "random" => Ok(PetField(PetChoice::Random)),
            "kitten" => Ok(PetField(PetChoice::Kitten)),
            "little dog" => Ok(PetField(PetChoice::LittleDog)),
            other => Err(serde::de::Error::custom(format!("unknown pet {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PetField(pub PetChoice);

#[derive(Debug, Clone, Deserialize)]
pub struct RoleProfile {
    pub name: String,
    pub strength: i32,
    #[serde(default)]
    pub strength_percentage: i32,
    pub dexterity: i32,
    pub constitution: i32,
    pub intelligence: i32,
    pub wisdom: i32,
    pub charisma: i32,
    pub hitpoints: i32,
    pub energy: i32,
    pub armor_class: i32,
    pub bare_hands: Dice,
    #[serde(default)]
    pub weapon: Option<String>,
    pub pet: PetField,
    #[serde(default)]
    pub inventory: Vec<StartingItem>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CharacterTable {
    pub version: u32,
    pub roles: BTreeMap<String, RoleProfile>,
    pub weapons: BTreeMap<String, Dice>,
}

impl CharacterTable {
    pub fn role(&self, role: &str) -> Option<&RoleProfile> {
        self.roles.get(role)
    }
}

/// SHA-256 (hex) of each table's source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableHashes {
    pub nutrition: String,
    pub monsters: String,
    pub experience: String,
    pub characters: String,
}

impl TableHashes {
    pub fn entries(&self) -> [(&'static str, &str); 4] {
        [
            ("nutrition", &self.nutrition),
            ("monsters", &self.monsters),
            ("experience", &self.experience),
            ("characters", &self.characters),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ConfigTables {
    pub nutrition: NutritionTable,
    pub monsters: MonsterTable,
    pub experience: ExperienceTable,
    pub characters: CharacterTable,
    pub hashes: TableHashes,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|source| ConfigError::Parse {
        what: what.to_string(),
        source,
    })
}

fn check_version(table: &'static str, found: u32) -> Result<(), ConfigError> {
    if found == TABLE_VERSION {
        Ok(())
    } else {
        Err(ConfigError::Version { table, found })
    }
}

impl ConfigTables {
    /// Builds the tables from the four file texts.
    pub fn from_texts(
        nutrition: &str,
        monsters: &str,
        experience: &str,
        characters: &str,
    ) -> Result<Self, ConfigError> {
        let mut nut: NutritionTable = parse(NUTRITION_FILE, nutrition)?;
        check_version("nutrition", nut.version)?;
        for (key, value) in &nut.food {
            let kind = ItemKind::from_key(key)
                .filter(|k| k.is_edible())
                .ok_or_else(|| ConfigError::Invalid(format!("unknown food {key:?}")))?;
            nut.by_kind.insert(kind, *value);
        }
        if let Some(missing) = ItemKind::FOODS.iter().find(|k| !nut.by_kind.contains_key(k)) {
            return Err(ConfigError::Invalid(format!(
                "nutrition table lacks {:?}",
                missing.key()
            )));
        }

        let mut mon: MonsterTable = parse(MONSTERS_FILE, monsters)?;
        check_version("monsters", mon.version)?;
        for key in mon.species.keys() {
            if Species::from_key(key).is_none() {
                return Err(ConfigError::Invalid(format!("unknown species {key:?}")));
            }
        }
        mon.by_species = Species::ALL
            .iter()
            .map(|s| {
                mon.species.get(s.key()).cloned().ok_or_else(|| {
                    ConfigError::Invalid(format!("monster table lacks {:?}", s.key()))
                })
            })
            .collect::<Result<_, _>>()?;

        let exp: ExperienceTable = parse(EXPERIENCE_FILE, experience)?;
        check_version("experience", exp.version)?;
        if exp.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid(
                "experience thresholds must increase".into(),
            ));
        }

        let chars: CharacterTable = parse(CHARACTERS_FILE, characters)?;
        check_version("characters", chars.version)?;
        for (role, profile) in &chars.roles {
            for it in &profile.inventory {
                if ItemKind::from_key(&it.item).is_none() {
                    return Err(ConfigError::Invalid(format!(
                        "role {role}: unknown item {:?}",
                        it.item
                    )));
                }
            }
            if let Some(w) = &profile.weapon {
                if !chars.weapons.contains_key(w) {
                    return Err(ConfigError::Invalid(format!(
                        "role {role}: unknown weapon {w:?}"
                    )));
                }
            }
        }

        Ok(ConfigTables {
            nutrition: nut,
            monsters: mon,
            experience: exp,
            characters: chars,
            hashes: TableHashes {
                nutrition: sha256_hex(nutrition.as_bytes()),
                monsters: sha256_hex(monsters.as_bytes()),
                experience: sha256_hex(experience.as_bytes()),
                characters: sha256_hex(characters.as_bytes()),
            },
        })
    }

    /// The tables compiled into this build.
    pub fn builtin() -> Arc<ConfigTables> {
        static BUILTIN: OnceLock<Arc<ConfigTables>> = OnceLock::new();
        BUILTIN
            .get_or_init(|| {
                Arc::new(
                    ConfigTables::from_texts(
                        include_str!("../data/nutrition.toml"),
                        include_str!("../data/monsters.toml"),
                        include_str!("../data/experience.toml"),
                        include_str!("../data/characters.toml"),
                    )
                    .expect("built-in config tables are valid"),
                )
            })
            .clone()
    }

    /// Loads all four tables from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ConfigError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })
        };
        ConfigTables::from_texts(
            &read(NUTRITION_FILE)?,
            &read(MONSTERS_FILE)?,
            &read(EXPERIENCE_FILE)?,
            &read(CHARACTERS_FILE)?,
        )
    }

    /// Built-in tables unless `DELVE_CONFIG_DIR` points elsewhere.
    pub fn from_env() -> Result<Arc<ConfigTables>, ConfigError> {
        match std::env::var_os(CONFIG_DIR_ENV) {
            Some(dir) => Ok(Arc::new(ConfigTables::load_dir(Path::new(&dir))?)),
            None => Ok(ConfigTables::builtin()),
        }
    }

    /// Writes the built-in table files into `dir`, for users who want to edit them.
    pub fn write_builtin(dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(NUTRITION_FILE), include_str!("../data/nutrition.toml"))?;
        std::fs::write(dir.join(MONSTERS_FILE), include_str!("../data/monsters.toml"))?;
        std::fs::write(dir.join(EXPERIENCE_FILE), include_str!("../data/experience.toml"))?;
        std::fs::write(dir.join(CHARACTERS_FILE), include_str!("../data/characters.toml"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_load() {
        let t = ConfigTables::builtin();
        assert_eq!(t.nutrition.food_value(ItemKind::FoodRation), Some(800));
        assert_eq!(t.nutrition.food_value(ItemKind::Apple), Some(50));
        assert_eq!(t.nutrition.food_value(ItemKind::Dagger), None);
        assert!(t.monsters.stats(Species::Kobold).poisonous);
        assert!(t.monsters.stats(Species::AcidBlob).acidic);
        assert!(t.monsters.stats(Species::Oracle).peaceful);
        assert_eq!(t.characters.roles.len(), 4);
    }

    #[test]
    fn corpse_nutrition_formula() {
        let t = ConfigTables::builtin();
        assert_eq!(t.nutrition.corpse_value(0), 20);
        assert_eq!(t.nutrition.corpse_value(5), 70);
    }

    #[test]
    fn experience_levels_double() {
        let t = ConfigTables::builtin();
        assert_eq!(t.experience.level_for(0), 1);
        assert_eq!(t.experience.level_for(19), 1);
        assert_eq!(t.experience.level_for(20), 2);
        assert_eq!(t.experience.level_for(39), 2);
        assert_eq!(t.experience.level_for(40), 3);
        assert_eq!(t.experience.level_for(80), 4);
        assert_eq!(t.experience.level_for(i64::MAX), 30);
    }

    #[test]
    fn dice_parse_and_bounds() {
        let d: Dice = "2d6".parse().unwrap();
        assert_eq!(d, Dice::new(2, 6));
        assert_eq!(d.to_string(), "2d6");
        assert!("d6".parse::<Dice>().is_err());
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let r = d.roll(&mut rng);
            assert!((2..=12).contains(&r));
        }
        assert_eq!(Dice::new(0, 0).roll(&mut rng), 0);
    }

    #[test]
    fn hash_changes_with_text() {
        let base = ConfigTables::builtin();
        let edited = include_str!("../data/nutrition.toml").replace("\"apple\" = 50", "\"apple\" = 51");
        let t = ConfigTables::from_texts(
            &edited,
            include_str!("../data/monsters.toml"),
            include_str!("../data/experience.toml"),
            include_str!("../data/characters.toml"),
        )
        .unwrap();
        assert_ne!(t.hashes.nutrition, base.hashes.nutrition);
        assert_eq!(t.hashes.monsters, base.hashes.monsters);
        assert_eq!(t.nutrition.food_value(ItemKind::Apple), Some(51));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let edited = include_str!("../data/experience.toml").replace("version = 1", "version = 2");
        let err = ConfigTables::from_texts(
            include_str!("../data/nutrition.toml"),
            include_str!("../data/monsters.toml"),
            &edited,
            include_str!("../data/characters.toml"),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Version { table: "experience", found: 2 }));
    }
}
