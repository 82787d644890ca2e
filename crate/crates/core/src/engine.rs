//! Turn-based world dynamics.
//!
//! [`GameState`] owns the whole world: materialized levels, the hero, the pet,
//! inventory, clocks and the episode's random streams. [`GameState::apply_action`]
//! runs one agent keypress, including the world turns it causes.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{Action, Direction};
use crate::config::{ConfigTables, Dice, PetChoice, RoleProfile};
use crate::dungeon::{self, DoorState, GenConfig, LevelBlueprint, Pos, Room, Tile, TrapKind};
use crate::entity::{FloorObject, Item, ItemKind, Species};
use crate::error::{ConfigError, EngineError};
use crate::glyph::GlyphId;
use crate::observe::{self, VisibilityMap};
use crate::rng::{self, StreamKind, StreamRng};

pub const MAX_INVENTORY: usize = 52;
const INVENTORY_LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
/// Movement points a creature spends per action.
const ACTION_COST: i32 = 12;
const SPAWN_CHANCE: f64 = 1.0 / 40.0;
const MONSTER_SIGHT: i32 = 6;
const RUN_LIMIT: usize = 80;

/// `role-race-alignment-gender`, e.g. `mon-hum-neu-mal`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CharacterSpec {
    pub role: String,
    pub race: String,
    pub alignment: String,
    pub gender: String,
}

const RACES: [&str; 5] = ["hum", "elf", "dwa", "gno", "orc"];
const ALIGNMENTS: [&str; 3] = ["law", "neu", "cha"];
const GENDERS: [&str; 2] = ["mal", "fem"];

impl FromStr for CharacterSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('-').collect();
        let [role, race, alignment, gender] = parts[..] else {
            return Err(ConfigError::MalformedCharacter(s.to_string()));
        };
        if !RACES.contains(&race) || !ALIGNMENTS.contains(&alignment) || !GENDERS.contains(&gender) {
            return Err(ConfigError::UnknownCharacter(s.to_string()));
        }
        Ok(CharacterSpec {
            role: role.to_string(),
            race: race.to_string(),
            alignment: alignment.to_string(),
            gender: gender.to_string(),
        })
    }
}

impl TryFrom<String> for CharacterSpec {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<CharacterSpec> for String {
    fn from(c: CharacterSpec) -> String {
        c.to_string()
    }
}

impl fmt::Display for CharacterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}-{}", self.role, self.race, self.alignment, self.gender)
    }
}

impl Default for CharacterSpec {
    fn default() -> Self {
        "mon-hum-neu-mal".parse().expect("valid default")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GameOptions {
    pub autopickup_gold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HungerState {
    Satiated = 0,
    NotHungry = 1,
    Hungry = 2,
    Weak = 3,
    Fainting = 4,
}

/// Maps nutrition to a hunger state with the configured thresholds.
pub fn hunger_state(nutrition: i32, t: &crate::config::NutritionTable) -> HungerState {
    if nutrition > t.satiated_above {
        HungerState::Satiated
    } else if nutrition >= t.not_hungry_from {
        HungerState::NotHungry
    } else if nutrition >= t.hungry_from {
        HungerState::Hungry
    } else if nutrition >= t.weak_from {
        HungerState::Weak
    } else {
        HungerState::Fainting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    Starvation,
    Trap,
    FoodPoisoning,
    /// Kicking a wall or other solid obstacle.
    KickedWall,
    Monster(Species),
}

impl fmt::Display for DeathCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeathCause::Starvation => f.write_str("starvation"),
            DeathCause::Trap => f.write_str("trap"),
            DeathCause::FoodPoisoning => f.write_str("food poisoning"),
            DeathCause::KickedWall => f.write_str("kicking a wall"),
            DeathCause::Monster(s) => write!(f, "killed by a {}", s.key()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DamageSource {
    Monster(Species),
    Trap(TrapKind),
    FoodPoisoning,
    Acid,
    KickedWall,
}

impl DamageSource {
    fn death_cause(self) -> DeathCause {
        match self {
            DamageSource::Monster(s) => DeathCause::Monster(s),
            DamageSource::Trap(_) => DeathCause::Trap,
            DamageSource::FoodPoisoning | DamageSource::Acid => DeathCause::FoodPoisoning,
            DamageSource::KickedWall => DeathCause::KickedWall,
        }
    }
}

/// Who took part in an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combatant {
    Hero,
    Pet(Species),
    Monster(Species),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Event {
    Moved,
    Bumped,
    DoorOpened,
    DoorKicked,
    FoundHidden(Pos),
    FoundTrap(Pos),
    Ate { nutrition: i32 },
    GoldCollected(u32),
    PickedUp(ItemKind),
    Attack {
        attacker: Combatant,
        defender: Combatant,
        hit: bool,
        damage: i32,
    },
    MonsterKilled {
        species: Species,
        level: i32,
        experience: i64,
        by_hero: bool,
    },
    LevelUp(i32),
    /// `with_pet`: the pet was adjacent and came along.
    Descended {
        depth: u32,
        first_arrival: bool,
        with_pet: bool,
    },
    Ascended { depth: u32 },
    TrapTriggered(TrapKind),
    DamageTaken { amount: i32, source: DamageSource },
    PetDied,
    Spawned(Species),
    Died(DeathCause),
}

/// In-game score change for an event.
pub fn score_delta(event: &Event) -> i64 {
    match *event {
        Event::MonsterKilled {
            by_hero: true,
            experience,
            ..
        } => 4 * experience,
        Event::Descended {
            depth,
            first_arrival: true,
            ..
        } => 50 * depth as i64,
        Event::GoldCollected(amount) => amount as i64,
        _ => 0,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    /// False when the action did not spend game time.
    pub time_advanced: bool,
    pub events: Vec<Event>,
    pub message: String,
}

impl StepOutcome {
    fn say(&mut self, msg: &str) {
        if !self.message.is_empty() {
            self.message.push_str("  ");
        }
        self.message.push_str(msg);
    }

    pub fn died(&self) -> Option<DeathCause> {
        self.events.iter().find_map(|e| match e {
            Event::Died(c) => Some(*c),
            _ => None,
        })
    }
}

/// Stats used by a single attack roll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fighter {
    pub to_hit: i32,
    pub armor_class: i32,
    pub damage: Dice,
    pub damage_bonus: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackResult {
    pub roll: i32,
    pub hit: bool,
    pub damage: i32,
}

/// Roll needed on d20 plus to-hit against a given armor class.
pub fn hit_target(defender_ac: i32) -> i32 {
    22 - defender_ac
}

/// Hit rule: a natural 20 always hits, otherwise roll + to-hit must reach the target.
pub fn attack_hits(roll: i32, attacker: &Fighter, defender: &Fighter) -> bool {
    roll == 20 || roll + attacker.to_hit >= hit_target(defender.armor_class)
}

pub fn resolve_combat<R: Rng + ?Sized>(attacker: &Fighter, defender: &Fighter, rng: &mut R) -> AttackResult {
    let roll = rng.random_range(1..=20);
    let hit = attack_hits(roll, attacker, defender);
    let damage = if hit {
        (attacker.damage.roll(rng) + attacker.damage_bonus).max(if attacker.damage.sides == 0 { 0 } else { 1 })
    } else {
        0
    };
    AttackResult { roll, hit, damage }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hero {
    pub pos: Pos,
    pub hitpoints: i32,
    pub max_hitpoints: i32,
    pub strength: i32,
    pub strength_percentage: i32,
    pub dexterity: i32,
    pub constitution: i32,
    pub intelligence: i32,
    pub wisdom: i32,
    pub charisma: i32,
    pub experience_level: i32,
    pub experience_points: i64,
    pub energy: i32,
    pub max_energy: i32,
    pub armor_class: i32,
    pub gold: u32,
    pub nutrition: i32,
    pub bare_hands: Dice,
    pub weapon: Option<Dice>,
    /// Turns left stuck in a bear trap.
    pub stuck: u32,
}

impl Hero {
    fn fighter(&self) -> Fighter {
        let abon = match self.strength {
            s if s < 6 => -2,
            s if s < 8 => -1,
            s if s < 17 => 0,
            _ => 1,
        };
        let dex = match self.dexterity {
            d if d < 4 => -3,
            d if d < 6 => -2,
            d if d < 8 => -1,
            d if d < 14 => 0,
            d => d - 14,
        };
        let dbon = match self.strength {
            s if s < 6 => -1,
            s if s < 16 => 0,
            s if s < 18 => 1,
            _ => 2,
        };
        Fighter {
            to_hit: 1 + self.experience_level + abon + dex,
            armor_class: self.armor_class,
            damage: self.weapon.unwrap_or(self.bare_hands),
            damage_bonus: dbon,
        }
    }

    fn kick_fighter(&self) -> Fighter {
        Fighter {
            damage: Dice::new(1, 4),
            ..self.fighter()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monster {
    pub species: Species,
    pub pos: Pos,
    pub hitpoints: i32,
    pub max_hitpoints: i32,
    pub movement: i32,
    pub peaceful: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pet {
    pub monster: Monster,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trap {
    pub pos: Pos,
    pub kind: TrapKind,
    pub seen: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InvSlot {
    pub letter: u8,
    pub item: Item,
}

/// One materialized dungeon floor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Level {
    pub depth: u32,
    pub tiles: Vec<Tile>,
    pub rooms: Vec<Room>,
    pub traps: Vec<Trap>,
    pub boulders: Vec<Pos>,
    pub objects: Vec<(Pos, FloorObject)>,
    pub monsters: Vec<Monster>,
    pub staircase_up: Option<Pos>,
    pub staircase_down: Option<Pos>,
    pub vision: VisibilityMap,
}

impl Level {
    fn from_blueprint(bp: LevelBlueprint, objects: Vec<(Pos, FloorObject)>) -> Level {
        Level {
            depth: bp.depth,
            rooms: bp.rooms,
            traps: bp
                .traps
                .iter()
                .map(|t| Trap {
                    pos: t.pos,
                    kind: t.kind,
                    seen: false,
                })
                .collect(),
            boulders: bp.boulders,
            objects,
            monsters: Vec::new(),
            staircase_up: bp.staircase_up,
            staircase_down: bp.staircase_down,
            tiles: bp.tiles,
            vision: VisibilityMap::new(),
        }
    }

    #[inline]
    pub fn tile(&self, p: Pos) -> Tile {
        self.tiles[p.index()]
    }

    pub fn set_tile(&mut self, p: Pos, t: Tile) {
        self.tiles[p.index()] = t;
    }

    pub fn monster_at(&self, p: Pos) -> Option<usize> {
        self.monsters.iter().position(|m| m.pos == p)
    }

    pub fn has_boulder(&self, p: Pos) -> bool {
        self.boulders.contains(&p)
    }

    pub fn trap_at(&self, p: Pos) -> Option<&Trap> {
        self.traps.iter().find(|t| t.pos == p)
    }

    pub fn objects_at(&self, p: Pos) -> impl Iterator<Item = &FloorObject> {
        self.objects.iter().filter(move |(q, _)| *q == p).map(|(_, o)| o)
    }

    /// Glyph of what lies on a tile ignoring creatures: boulder, top object,
    /// discovered trap, then the feature itself.
    pub fn object_glyph(&self, p: Pos) -> GlyphId {
        if self.has_boulder(p) {
            return crate::glyph::BOULDER;
        }
        if let Some((_, o)) = self.objects.iter().rev().find(|(q, _)| *q == p) {
            return o.glyph();
        }
        if self.trap_at(p).is_some_and(|t| t.seen) {
            return crate::glyph::TRAP;
        }
        self.tile(p).glyph()
    }

    pub fn lit_room_containing(&self, p: Pos) -> Option<&Room> {
        self.rooms.iter().find(|r| r.lit && r.contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pending {
    Kick,
    Open,
    Close,
}

/// Where the food comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EatTarget {
    Slot(u8),
    Floor,
}

/// The complete mutable world.
#[derive(Debug, Clone)]
pub struct GameState {
    tables: Arc<ConfigTables>,
    gen: GenConfig,
    game_seed: u64,
    episode_seed: u64,
    character: CharacterSpec,
    options: GameOptions,
    oracle_depth: u32,
    levels: BTreeMap<u32, Level>,
    depth: u32,
    deepest: u32,
    hero: Hero,
    pet: Option<Pet>,
    inventory: Vec<InvSlot>,
    turn: u64,
    score: i64,
    spawn_rng: StreamRng,
    combat_rng: StreamRng,
    pending: Option<Pending>,
    death: Option<DeathCause>,
    message: String,
}

impl GameState {
    /// New game at depth 1 with the character's starting kit and a pet next to the hero.
    pub fn new(
        tables: Arc<ConfigTables>,
        gen: GenConfig,
        character: CharacterSpec,
        options: GameOptions,
        game_seed: u64,
        episode_seed: u64,
    ) -> Result<GameState, ConfigError> {
        let profile: RoleProfile = tables
            .characters
            .role(&character.role)
            .cloned()
            .ok_or_else(|| ConfigError::UnknownCharacter(character.to_string()))?;
        if gen.max_depth < 1 {
            return Err(ConfigError::Invalid("max_depth must be at least 1".into()));
        }
        let weapon = profile
            .weapon
            .as_ref()
            .and_then(|w| tables.characters.weapons.get(w).copied());
        let hero = Hero {
            pos: Pos::default(),
            hitpoints: profile.hitpoints,
            max_hitpoints: profile.hitpoints,
            strength: profile.strength,
            strength_percentage: profile.strength_percentage,
            dexterity: profile.dexterity,
            constitution: profile.constitution,
            intelligence: profile.intelligence,
            wisdom: profile.wisdom,
            charisma: profile.charisma,
            experience_level: 1,
            experience_points: 0,
            energy: profile.energy,
            max_energy: profile.energy,
            armor_class: profile.armor_class,
            gold: 0,
            nutrition: tables.nutrition.starting_nutrition,
            bare_hands: profile.bare_hands,
            weapon,
            stuck: 0,
        };
        let mut state = GameState {
            oracle_depth: dungeon::oracle_depth(game_seed),
            tables,
            gen,
            game_seed,
            episode_seed,
            character,
            options,
            levels: BTreeMap::new(),
            depth: 1,
            deepest: 1,
            hero,
            pet: None,
            inventory: Vec::new(),
            turn: 1,
            score: 0,
            spawn_rng: rng::stream(episode_seed, StreamKind::MonsterSpawn, 0),
            combat_rng: rng::stream(episode_seed, StreamKind::Combat, 0),
            pending: None,
            death: None,
            message: String::new(),
        };
        for it in &profile.inventory {
            let kind = ItemKind::from_key(&it.item).expect("validated by config loader");
            state.add_to_inventory(Item::new(kind, it.count));
        }
        let start = state.materialize(1).expect("depth 1 is always valid");
        state.hero.pos = start;
        let species = match profile.pet.0 {
            PetChoice::Kitten => Species::Kitten,
            PetChoice::LittleDog => Species::LittleDog,
            PetChoice::Random => {
                if state.spawn_rng.random_bool(0.5) {
                    Species::Kitten
                } else {
                    Species::LittleDog
                }
            }
        };
        if let Some(p) = state.free_spot_near(start) {
            let monster = state.make_monster(species, p);
            state.pet = Some(Pet { monster, depth: 1 });
        }
        state.populate(1);
        state.update_vision();
        state.message = format!(
            "Hello, welcome to the dungeon! You are a {} {}.",
            state.character.alignment_word(),
            profile.name
        );
        Ok(state)
    }

    // Accessors.

    pub fn tables(&self) -> &Arc<ConfigTables> {
        &self.tables
    }
    pub fn gen_config(&self) -> &GenConfig {
        &self.gen
    }
    pub fn game_seed(&self) -> u64 {
        self.game_seed
    }
    pub fn episode_seed(&self) -> u64 {
        self.episode_seed
    }
    pub fn character(&self) -> &CharacterSpec {
        &self.character
    }
    pub fn options(&self) -> GameOptions {
        self.options
    }
    pub fn hero(&self) -> &Hero {
        &self.hero
    }
    pub fn pet(&self) -> Option<&Pet> {
        self.pet.as_ref()
    }
    /// The pet, if it is on the hero's current level.
    pub fn pet_here(&self) -> Option<&Monster> {
        self.pet
            .as_ref()
            .filter(|p| p.depth == self.depth)
            .map(|p| &p.monster)
    }
    pub fn inventory(&self) -> &[InvSlot] {
        &self.inventory
    }
    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn deepest(&self) -> u32 {
        self.deepest
    }
    pub fn turn(&self) -> u64 {
        self.turn
    }
    pub fn score(&self) -> i64 {
        self.score
    }
    pub fn oracle_depth(&self) -> u32 {
        self.oracle_depth
    }
    pub fn death(&self) -> Option<DeathCause> {
        self.death
    }
    pub fn is_alive(&self) -> bool {
        self.death.is_none()
    }
    pub fn message(&self) -> &str {
        &self.message
    }
    pub fn level(&self) -> &Level {
        &self.levels[&self.depth]
    }
    pub fn levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.values()
    }
    pub fn hunger_state(&self) -> HungerState {
        hunger_state(self.hero.nutrition, &self.tables.nutrition)
    }
    /// Waiting for a direction after kick, open or close.
    pub fn awaiting_direction(&self) -> bool {
        self.pending.is_some()
    }

    /// Hero is next to the Oracle.
    pub fn next_to_oracle(&self) -> bool {
        self.level()
            .monsters
            .iter()
            .any(|m| m.species == Species::Oracle && m.pos.chebyshev(self.hero.pos) == 1)
    }

    pub fn pet_adjacent(&self) -> bool {
        self.pet_here()
            .is_some_and(|p| p.pos.chebyshev(self.hero.pos) == 1)
    }

    /// Tiles never seen, summed over every materialized level.
    pub fn seen_tile_total(&self) -> usize {
        self.levels.values().map(|l| l.vision.seen_count()).sum()
    }

    // Fixture hooks for scripted scenarios.

    #[doc(hidden)]
    pub fn hero_mut(&mut self) -> &mut Hero {
        &mut self.hero
    }
    #[doc(hidden)]
    pub fn level_mut(&mut self) -> &mut Level {
        self.levels.get_mut(&self.depth).expect("current level exists")
    }
    #[doc(hidden)]
    pub fn pet_mut(&mut self) -> Option<&mut Pet> {
        self.pet.as_mut()
    }
    #[doc(hidden)]
    pub fn set_pet(&mut self, pet: Option<Pet>) {
        self.pet = pet;
    }
    #[doc(hidden)]
    pub fn set_turn(&mut self, turn: u64) {
        self.turn = turn;
    }
    #[doc(hidden)]
    pub fn place_monster(&mut self, species: Species, pos: Pos) {
        let m = self.make_monster(species, pos);
        self.level_mut().monsters.push(m);
    }
    #[doc(hidden)]
    pub fn give_item(&mut self, item: Item) -> Option<u8> {
        self.add_to_inventory(item)
    }
    #[doc(hidden)]
    pub fn refresh_vision(&mut self) {
        self.update_vision();
    }

    /// Stable hash of the full world state, including random stream positions.
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        self.game_seed.hash(&mut h);
        self.episode_seed.hash(&mut h);
        self.character.hash(&mut h);
        for (d, l) in &self.levels {
            d.hash(&mut h);
            l.hash(&mut h);
        }
        self.depth.hash(&mut h);
        self.deepest.hash(&mut h);
        self.hero.hash(&mut h);
        self.pet.hash(&mut h);
        self.inventory.hash(&mut h);
        self.turn.hash(&mut h);
        self.score.hash(&mut h);
        rng::position(&self.spawn_rng).hash(&mut h);
        rng::position(&self.combat_rng).hash(&mut h);
        self.pending.hash(&mut h);
        self.death.hash(&mut h);
        self.message.hash(&mut h);
        h.finish()
    }

    /// Runs one keypress: the hero's action plus every world turn it spends.
    pub fn apply_action(&mut self, action: Action) -> Result<StepOutcome, EngineError> {
        if self.death.is_some() {
            return Err(EngineError::EpisodeOver);
        }
        let mut out = StepOutcome::default();
        if let Some(pending) = self.pending.take() {
            match action.direction() {
                Some(dir) => {
                    let took = match pending {
                        Pending::Kick => self.kick(dir, &mut out),
                        Pending::Open => self.open_door(dir, &mut out),
                        Pending::Close => self.close_door(dir, &mut out),
                    };
                    if took {
                        self.end_turn(&mut out);
                    }
                }
                None => out.say("Never mind."),
            }
        } else {
            match action {
                Action::Move(dir) => {
                    if self.hero_step(dir, &mut out) {
                        self.end_turn(&mut out);
                    }
                }
                Action::MoveFar(dir) => self.run(dir, &mut out),
                Action::Kick => {
                    self.pending = Some(Pending::Kick);
                    out.say("In what direction?");
                }
                Action::Open => {
                    self.pending = Some(Pending::Open);
                    out.say("In what direction?");
                }
                Action::Close => {
                    self.pending = Some(Pending::Close);
                    out.say("In what direction?");
                }
                Action::Search => {
                    self.search(&mut out);
                    self.end_turn(&mut out);
                }
                Action::Wait => self.end_turn(&mut out),
                Action::Eat => {
                    let target = self.choose_food();
                    match target {
                        Some(t) => {
                            let ate = self.eat_item(t)?;
                            out.events.extend(ate.events);
                            out.say(&ate.message);
                            self.end_turn(&mut out);
                        }
                        None => out.say("You don't have anything to eat."),
                    }
                }
                Action::Pickup => {
                    if self.pickup(&mut out) {
                        self.end_turn(&mut out);
                    }
                }
                Action::Down => {
                    if self.level().tile(self.hero.pos) == Tile::StairsDown {
                        self.change_level(self.depth + 1, &mut out);
                        self.end_turn(&mut out);
                    } else {
                        out.say("You can't go down here.");
                    }
                }
                Action::Up => {
                    if self.level().tile(self.hero.pos) == Tile::StairsUp {
                        self.change_level(self.depth - 1, &mut out);
                        self.end_turn(&mut out);
                    } else {
                        out.say("You can't go up here.");
                    }
                }
                Action::More | Action::Esc => {}
            }
        }
        self.check_death(&mut out);
        self.update_vision();
        for e in &out.events {
            self.score += score_delta(e);
        }
        self.message = out.message.clone();
        Ok(out)
    }

    fn end_turn(&mut self, out: &mut StepOutcome) {
        out.time_advanced = true;
        self.turn += 1;
        if self.death.is_some() {
            return;
        }
        let events = self.advance_world();
        for e in &events {
            if let Event::Died(c) = e {
                out.say(&death_message(*c));
            }
        }
        out.events.extend(events);
        self.update_vision();
    }

    fn check_death(&mut self, out: &mut StepOutcome) {
        if self.death.is_none() && self.hero.hitpoints <= 0 {
            // Damage recorded without an explicit Died event.
            let cause = out
                .events
                .iter()
                .rev()
                .find_map(|e| match e {
                    Event::DamageTaken { source, .. } => Some(source.death_cause()),
                    _ => None,
                })
                .unwrap_or(DeathCause::Trap);
            self.kill_hero(cause, out);
        }
    }

    fn kill_hero(&mut self, cause: DeathCause, out: &mut StepOutcome) {
        if self.death.is_none() {
            self.hero.hitpoints = 0;
            self.death = Some(cause);
            self.pending = None;
            out.events.push(Event::Died(cause));
            out.say(&death_message(cause));
        }
    }

    fn damage_hero(&mut self, amount: i32, source: DamageSource, out: &mut StepOutcome) {
        if amount <= 0 || self.death.is_some() {
            return;
        }
        self.hero.hitpoints -= amount;
        out.events.push(Event::DamageTaken { amount, source });
        if self.hero.hitpoints <= 0 {
            self.kill_hero(source.death_cause(), out);
        }
    }

    /// Returns true when the step spent time.
    fn hero_step(&mut self, dir: Direction, out: &mut StepOutcome) -> bool {
        let (dx, dy) = dir.delta();
        let from = self.hero.pos;
        let to = from.offset(dx, dy);
        if self.hero.stuck > 0 {
            self.hero.stuck -= 1;
            out.say("You cannot pull your foot out of the bear trap.");
            return true;
        }
        if !to.in_bounds() {
            out.events.push(Event::Bumped);
            return false;
        }
        if let Some(i) = self.level().monster_at(to) {
            let m = &self.level().monsters[i];
            if m.peaceful {
                out.events.push(Event::Bumped);
                out.say("You stop. The Oracle is in your way.");
                return false;
            }
            self.hero_attack(i, false, out);
            return true;
        }
        let tile_to = self.level().tile(to);
        let tile_from = self.level().tile(from);
        if dir.is_diagonal() && (tile_to.blocks_diagonal() || tile_from.blocks_diagonal()) {
            out.events.push(Event::Bumped);
            out.say("You can't move diagonally into or out of a doorway.");
            return false;
        }
        match tile_to {
            Tile::Stone => {
                out.events.push(Event::Bumped);
                out.say("It's solid stone.");
                return false;
            }
            Tile::Wall(_)
            | Tile::Door {
                state: DoorState::Hidden,
                ..
            } => {
                out.events.push(Event::Bumped);
                out.say("It's a wall.");
                return false;
            }
            Tile::Door {
                state: DoorState::Locked,
                ..
            } => {
                out.events.push(Event::Bumped);
                out.say("This door is locked.");
                return false;
            }
            Tile::Door {
                state: DoorState::Closed,
                in_vertical_wall,
            } => {
                // Walking into a closed door tries to open it.
                self.try_open(to, in_vertical_wall, out);
                return true;
            }
            _ => {}
        }
        if self.pet_here().is_some_and(|p| p.pos == to) {
            let name = self.pet_here().map(|p| p.species.key()).unwrap_or("pet");
            out.say(&format!("You swap places with your {name}."));
            if let Some(p) = self.pet.as_mut() {
                p.monster.pos = from;
            }
            self.hero.pos = to;
            out.events.push(Event::Moved);
            self.arrive(out);
            return true;
        }
        if self.level().has_boulder(to) {
            let beyond = to.offset(dx, dy);
            let free = beyond.in_bounds()
                && self.level().tile(beyond).is_open_ground()
                && !matches!(self.level().tile(beyond), Tile::Door { .. })
                && !self.level().has_boulder(beyond)
                && self.level().monster_at(beyond).is_none()
                && !self.pet_here().is_some_and(|p| p.pos == beyond);
            if !free {
                out.events.push(Event::Bumped);
                out.say("You try to move the boulder, but in vain.");
                return false;
            }
            let lvl = self.level_mut();
            if let Some(b) = lvl.boulders.iter_mut().find(|b| **b == to) {
                *b = beyond;
            }
            out.say("With great effort you move the boulder.");
        }
        self.hero.pos = to;
        out.events.push(Event::Moved);
        self.arrive(out);
        true
    }

    /// Effects of stepping onto the hero's current tile.
    fn arrive(&mut self, out: &mut StepOutcome) {
        let pos = self.hero.pos;
        if let Some(kind) = self.level().trap_at(pos).map(|t| t.kind) {
            if let Some(t) = self.level_mut().traps.iter_mut().find(|t| t.pos == pos) {
                t.seen = true;
            }
            out.events.push(Event::TrapTriggered(kind));
            match kind {
                TrapKind::Arrow => {
                    out.say("An arrow shoots out at you!");
                    let dmg = Dice::new(1, 6).roll(&mut self.combat_rng);
                    self.damage_hero(dmg, DamageSource::Trap(kind), out);
                }
                TrapKind::BearTrap => {
                    out.say("A bear trap closes on your foot!");
                    self.hero.stuck = self.combat_rng.random_range(4..=7);
                    let dmg = Dice::new(2, 4).roll(&mut self.combat_rng);
                    self.damage_hero(dmg, DamageSource::Trap(kind), out);
                }
            }
        }
        if self.options.autopickup_gold {
            let lvl = self.level_mut();
            let mut collected = 0;
            lvl.objects.retain(|(p, o)| match o {
                FloorObject::Gold(n) if *p == pos => {
                    collected += n;
                    false
                }
                _ => true,
            });
            if collected > 0 {
                self.hero.gold += collected;
                out.events.push(Event::GoldCollected(collected));
                out.say(&format!("{collected} gold piece{}.", if collected == 1 { "" } else { "s" }));
            }
        }
        let here: Vec<String> = self.level().objects_at(pos).map(|o| o.describe()).collect();
        match here.len() {
            0 => {}
            1 => out.say(&format!("You see here {}.", here[0])),
            _ => out.say("There are several objects here."),
        }
    }

    fn run(&mut self, dir: Direction, out: &mut StepOutcome) {
        for i in 0..RUN_LIMIT {
            if i > 0 && !self.run_can_continue(dir) {
                break;
            }
            let before = self.level().tile(self.hero.pos);
            if !self.hero_step(dir, out) {
                break;
            }
            self.end_turn(out);
            if self.death.is_some() || self.hero.stuck > 0 {
                break;
            }
            let here = self.hero.pos;
            let tile = self.level().tile(here);
            let entered_room = before == Tile::Corridor && tile != Tile::Corridor;
            let interesting = matches!(tile, Tile::Door { .. } | Tile::StairsUp | Tile::StairsDown)
                || self.level().objects_at(here).next().is_some()
                || self.level().trap_at(here).is_some_and(|t| t.seen);
            let hostile_adjacent = self
                .level()
                .monsters
                .iter()
                .any(|m| m.pos.chebyshev(here) == 1);
            let fork = tile == Tile::Corridor
                && here
                    .neighbors8()
                    .filter(|q| self.level().tile(*q).is_open_ground() || matches!(self.level().tile(*q), Tile::Door { .. }))
                    .count()
                    > 2;
            if entered_room || interesting || hostile_adjacent || fork {
                break;
            }
        }
    }

    fn run_can_continue(&self, dir: Direction) -> bool {
        let (dx, dy) = dir.delta();
        let from = self.hero.pos;
        let to = from.offset(dx, dy);
        if !to.in_bounds() {
            return false;
        }
        let lvl = self.level();
        let t = lvl.tile(to);
        if !t.is_open_ground() || lvl.has_boulder(to) || lvl.monster_at(to).is_some() {
            return false;
        }
        if self.pet_here().is_some_and(|p| p.pos == to) {
            return false;
        }
        !(dir.is_diagonal() && (t.blocks_diagonal() || lvl.tile(from).blocks_diagonal()))
    }

    fn try_open(&mut self, pos: Pos, in_vertical_wall: bool, out: &mut StepOutcome) {
        let threshold = (self.hero.strength + self.hero.dexterity + self.hero.constitution) / 3;
        let roll = self.combat_rng.random_range(0..20);
        if roll < threshold {
            self.level_mut().set_tile(
                pos,
                Tile::Door {
                    state: DoorState::Open,
                    in_vertical_wall,
                },
            );
            out.events.push(Event::DoorOpened);
            out.say("The door opens.");
        } else {
            out.say("The door is stuck.");
        }
    }

    fn open_door(&mut self, dir: Direction, out: &mut StepOutcome) -> bool {
        let (dx, dy) = dir.delta();
        let pos = self.hero.pos.offset(dx, dy);
        if !pos.in_bounds() {
            out.say("You see no door there.");
            return false;
        }
        match self.level().tile(pos) {
            Tile::Door {
                state: DoorState::Closed,
                in_vertical_wall,
            } => {
                self.try_open(pos, in_vertical_wall, out);
                true
            }
            Tile::Door {
                state: DoorState::Locked,
                ..
            } => {
                out.say("This door is locked.");
                false
            }
            Tile::Door {
                state: DoorState::Open | DoorState::Broken,
                ..
            } => {
                out.say("This door is already open.");
                false
            }
            _ => {
                out.say("You see no door there.");
                false
            }
        }
    }

    fn close_door(&mut self, dir: Direction, out: &mut StepOutcome) -> bool {
        let (dx, dy) = dir.delta();
        let pos = self.hero.pos.offset(dx, dy);
        if !pos.in_bounds() {
            out.say("You see no door there.");
            return false;
        }
        match self.level().tile(pos) {
            Tile::Door {
                state: DoorState::Open,
                in_vertical_wall,
            } => {
                let blocked = self.level().objects_at(pos).next().is_some()
                    || self.level().monster_at(pos).is_some()
                    || self.pet_here().is_some_and(|p| p.pos == pos);
                if blocked {
                    out.say("Something's in the way.");
                    return false;
                }
                self.level_mut().set_tile(
                    pos,
                    Tile::Door {
                        state: DoorState::Closed,
                        in_vertical_wall,
                    },
                );
                out.say("The door closes.");
                true
            }
            Tile::Door {
                state: DoorState::Closed | DoorState::Locked,
                ..
            } => {
                out.say("This door is already closed.");
                false
            }
            _ => {
                out.say("You see no door there.");
                false
            }
        }
    }

    /// Kicks in a direction; always spends time.
    fn kick(&mut self, dir: Direction, out: &mut StepOutcome) -> bool {
        let (dx, dy) = dir.delta();
        let pos = self.hero.pos.offset(dx, dy);
        if !pos.in_bounds() {
            out.say("Ouch! That hurts!");
            let dmg = Dice::new(1, 4).roll(&mut self.combat_rng);
            self.damage_hero(dmg, DamageSource::KickedWall, out);
            return true;
        }
        if let Some(i) = self.level().monster_at(pos) {
            if !self.level().monsters[i].peaceful {
                self.hero_attack(i, true, out);
                return true;
            }
        }
        if self.level().has_boulder(pos) {
            out.say("Ouch! That hurts!");
            let dmg = Dice::new(1, 4).roll(&mut self.combat_rng);
            self.damage_hero(dmg, DamageSource::KickedWall, out);
            return true;
        }
        match self.level().tile(pos) {
            Tile::Door {
                state: DoorState::Locked | DoorState::Closed,
                in_vertical_wall,
            } => {
                let p = (self.hero.strength as f64 / 25.0).clamp(0.0, 1.0);
                if self.combat_rng.random_bool(p) {
                    self.level_mut().set_tile(
                        pos,
                        Tile::Door {
                            state: DoorState::Broken,
                            in_vertical_wall,
                        },
                    );
                    out.events.push(Event::DoorKicked);
                    out.say("WHAMM!! The door crashes open!");
                } else {
                    out.say("WHAMM!!");
                }
            }
            Tile::Wall(_)
            | Tile::Stone
            | Tile::Door {
                state: DoorState::Hidden,
                ..
            } => {
                out.say("Ouch! That hurts!");
                let dmg = Dice::new(1, 4).roll(&mut self.combat_rng);
                self.damage_hero(dmg, DamageSource::KickedWall, out);
            }
            _ => out.say("You kick at empty space."),
        }
        true
    }

    fn search(&mut self, out: &mut StepOutcome) {
        let here = self.hero.pos;
        let neighbors: Vec<Pos> = here.neighbors8().collect();
        for p in neighbors {
            if let Tile::Door {
                state: DoorState::Hidden,
                in_vertical_wall,
            } = self.level().tile(p)
            {
                if self.combat_rng.random_bool(1.0 / 3.0) {
                    self.level_mut().set_tile(
                        p,
                        Tile::Door {
                            state: DoorState::Closed,
                            in_vertical_wall,
                        },
                    );
                    out.events.push(Event::FoundHidden(p));
                    out.say("You find a hidden door.");
                }
            }
            let unseen_trap = self.level().trap_at(p).is_some_and(|t| !t.seen);
            if unseen_trap && self.combat_rng.random_bool(1.0 / 3.0) {
                if let Some(t) = self.level_mut().traps.iter_mut().find(|t| t.pos == p) {
                    t.seen = true;
                }
                out.events.push(Event::FoundTrap(p));
                out.say("You find a trap.");
            }
        }
    }

    fn pickup(&mut self, out: &mut StepOutcome) -> bool {
        let pos = self.hero.pos;
        let lvl = self.levels.get_mut(&self.depth).expect("current level");
        let mut here = Vec::new();
        let mut rest = Vec::with_capacity(lvl.objects.len());
        for (p, o) in lvl.objects.drain(..) {
            if p == pos {
                here.push(o);
            } else {
                rest.push((p, o));
            }
        }
        lvl.objects = rest;
        if here.is_empty() {
            out.say("There is nothing here to pick up.");
            return false;
        }
        for o in here {
            match o {
                FloorObject::Gold(n) => {
                    self.hero.gold += n;
                    out.events.push(Event::GoldCollected(n));
                    out.say(&format!("{n} gold piece{}.", if n == 1 { "" } else { "s" }));
                }
                FloorObject::Item(item) => {
                    let kind = item.kind;
                    let desc = kind.describe(item.quantity);
                    match self.add_to_inventory(item.clone()) {
                        Some(letter) => {
                            out.events.push(Event::PickedUp(kind));
                            out.say(&format!("{} - {desc}.", letter as char));
                        }
                        None => {
                            self.level_mut().objects.push((pos, FloorObject::Item(item)));
                            out.say("You have too many items to pick that up.");
                        }
                    }
                }
            }
        }
        true
    }

    fn add_to_inventory(&mut self, item: Item) -> Option<u8> {
        if item.kind.stacks() {
            if let Some(slot) = self.inventory.iter_mut().find(|s| s.item.kind == item.kind) {
                slot.item.quantity += item.quantity;
                return Some(slot.letter);
            }
        }
        if self.inventory.len() >= MAX_INVENTORY {
            return None;
        }
        let letter = *INVENTORY_LETTERS
            .iter()
            .find(|l| !self.inventory.iter().any(|s| s.letter == **l))?;
        self.inventory.push(InvSlot { letter, item });
        self.inventory.sort_by_key(|s| {
            INVENTORY_LETTERS
                .iter()
                .position(|l| *l == s.letter)
                .unwrap_or(usize::MAX)
        });
        Some(letter)
    }

    fn choose_food(&self) -> Option<EatTarget> {
        if self
            .level()
            .objects_at(self.hero.pos)
            .any(|o| matches!(o, FloorObject::Item(it) if it.kind.is_edible()))
        {
            return Some(EatTarget::Floor);
        }
        self.inventory
            .iter()
            .find(|s| s.item.kind.is_edible())
            .map(|s| EatTarget::Slot(s.letter))
    }

    /// Consumes one unit of food. Game time is spent by the caller.
    pub fn eat_item(&mut self, target: EatTarget) -> Result<StepOutcome, EngineError> {
        if self.death.is_some() {
            return Err(EngineError::EpisodeOver);
        }
        let item = match target {
            EatTarget::Slot(letter) => {
                let idx = self
                    .inventory
                    .iter()
                    .position(|s| s.letter == letter)
                    .ok_or(EngineError::NoSuchSlot(letter as char))?;
                let kind = self.inventory[idx].item.kind;
                if !kind.is_edible() {
                    return Err(EngineError::Inedible(kind.describe(1)));
                }
                let slot = &mut self.inventory[idx];
                let one = Item {
                    quantity: 1,
                    ..slot.item.clone()
                };
                slot.item.quantity -= 1;
                if slot.item.quantity == 0 {
                    self.inventory.remove(idx);
                }
                one
            }
            EatTarget::Floor => {
                let pos = self.hero.pos;
                let lvl = self.level_mut();
                let idx = lvl
                    .objects
                    .iter()
                    .rposition(|(p, o)| *p == pos && matches!(o, FloorObject::Item(it) if it.kind.is_edible()))
                    .ok_or_else(|| EngineError::Inedible("nothing here".into()))?;
                let FloorObject::Item(it) = &mut lvl.objects[idx].1 else {
                    unreachable!("matched above");
                };
                let one = Item {
                    quantity: 1,
                    ..it.clone()
                };
                it.quantity -= 1;
                if it.quantity == 0 {
                    lvl.objects.remove(idx);
                }
                one
            }
        };
        let mut out = StepOutcome::default();
        self.consume(item, &mut out);
        self.check_death(&mut out);
        Ok(out)
    }

    fn consume(&mut self, item: Item, out: &mut StepOutcome) {
        let nut = &self.tables.nutrition;
        match item.kind {
            ItemKind::Corpse(species) => {
                let stats = self.tables.monsters.stats(species).clone();
                let value = nut.corpse_value(stats.level);
                let rotten = self.turn.saturating_sub(item.created_turn) > nut.freshness_window;
                let poison_roll = rotten && self.combat_rng.random_bool(nut.rotten_poison_probability);
                self.hero.nutrition += value;
                out.events.push(Event::Ate { nutrition: value });
                out.say(&format!("This {} corpse tastes terrible!", species.key()));
                if poison_roll {
                    out.say("Ulch - that meat was tainted! You feel deathly sick.");
                    self.kill_hero(DeathCause::FoodPoisoning, out);
                    return;
                }
                if stats.poisonous {
                    out.say("Ecch - that must have been poisonous!");
                    let dmg = self.tables.nutrition.poison_damage.roll(&mut self.combat_rng);
                    self.damage_hero(dmg.max(1), DamageSource::FoodPoisoning, out);
                }
                if stats.acidic {
                    out.say("You have a very bad case of stomach acid.");
                    let dmg = self.tables.nutrition.acid_damage.roll(&mut self.combat_rng);
                    self.damage_hero(dmg.max(1), DamageSource::Acid, out);
                }
            }
            kind => {
                let value = nut.food_value(kind).unwrap_or(0);
                self.hero.nutrition += value;
                out.events.push(Event::Ate { nutrition: value });
                out.say(&format!("This {} is delicious!", kind.key()));
            }
        }
    }

    fn hero_attack(&mut self, idx: usize, kick: bool, out: &mut StepOutcome) {
        let attacker = if kick {
            self.hero.kick_fighter()
        } else {
            self.hero.fighter()
        };
        let (species, ac) = {
            let m = &self.level().monsters[idx];
            (m.species, self.tables.monsters.stats(m.species).armor_class)
        };
        let defender = Fighter {
            to_hit: 0,
            armor_class: ac,
            damage: Dice::new(0, 0),
            damage_bonus: 0,
        };
        let res = resolve_combat(&attacker, &defender, &mut self.combat_rng);
        out.events.push(Event::Attack {
            attacker: Combatant::Hero,
            defender: Combatant::Monster(species),
            hit: res.hit,
            damage: res.damage,
        });
        if !res.hit {
            out.say(&format!("You miss the {}.", species.key()));
            return;
        }
        let lvl = self.level_mut();
        lvl.monsters[idx].hitpoints -= res.damage;
        if lvl.monsters[idx].hitpoints > 0 {
            out.say(&format!("You hit the {}.", species.key()));
            return;
        }
        out.say(&format!("You kill the {}!", species.key()));
        self.monster_dies(idx, true, out);
    }

    fn monster_dies(&mut self, idx: usize, by_hero: bool, out: &mut StepOutcome) {
        let turn = self.turn;
        let lvl = self.level_mut();
        let m = lvl.monsters.remove(idx);
        if m.species != Species::Oracle {
            lvl.objects.push((m.pos, FloorObject::Item(Item::corpse(m.species, turn))));
        }
        let stats = self.tables.monsters.stats(m.species);
        let experience = stats.experience;
        out.events.push(Event::MonsterKilled {
            species: m.species,
            level: stats.level,
            experience,
            by_hero,
        });
        if by_hero {
            self.gain_experience(experience, out);
        }
    }

    fn gain_experience(&mut self, points: i64, out: &mut StepOutcome) {
        self.hero.experience_points += points;
        let target = self.tables.experience.level_for(self.hero.experience_points);
        while self.hero.experience_level < target {
            self.hero.experience_level += 1;
            let gain = self.tables.experience.hit_dice_per_level.roll(&mut self.combat_rng).max(1);
            self.hero.max_hitpoints += gain;
            self.hero.hitpoints += gain;
            out.events.push(Event::LevelUp(self.hero.experience_level));
            out.say(&format!("Welcome to experience level {}.", self.hero.experience_level));
        }
    }

    fn make_monster(&mut self, species: Species, pos: Pos) -> Monster {
        let stats = self.tables.monsters.stats(species);
        let hp = if stats.level <= 0 {
            self.spawn_rng.random_range(1..=4)
        } else {
            Dice::new(stats.level as u32, 8).roll(&mut self.spawn_rng)
        };
        Monster {
            species,
            pos,
            hitpoints: hp,
            max_hitpoints: hp,
            movement: 0,
            peaceful: stats.peaceful,
        }
    }

    fn occupied(&self, p: Pos) -> bool {
        self.hero.pos == p
            || self.level().monster_at(p).is_some()
            || self.pet_here().is_some_and(|m| m.pos == p)
            || self.level().has_boulder(p)
    }

    fn free_spot_near(&self, center: Pos) -> Option<Pos> {
        let lvl = self.level();
        for radius in 1..4i32 {
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    if dx.abs().max(dy.abs()) != radius {
                        continue;
                    }
                    let p = center.offset(dx, dy);
                    if p.in_bounds() && matches!(lvl.tile(p), Tile::Floor | Tile::Corridor) && !self.occupied(p) {
                        return Some(p);
                    }
                }
            }
        }
        None
    }

    /// Builds level `depth` on first visit and returns the arrival position.
    fn materialize(&mut self, depth: u32) -> Result<Pos, crate::error::GenError> {
        if !self.levels.contains_key(&depth) {
            let bp = dungeon::generate_level(self.game_seed, depth, &self.gen)?;
            let objects = dungeon::place_items(self.game_seed, &bp);
            let oracle = bp.oracle;
            let start = bp.hero_start;
            let mut level = Level::from_blueprint(bp, objects);
            if let Some(p) = oracle {
                level.monsters.push(Monster {
                    species: Species::Oracle,
                    pos: p,
                    hitpoints: 100,
                    max_hitpoints: 100,
                    movement: 0,
                    peaceful: true,
                });
            }
            self.levels.insert(depth, level);
            if let Some(s) = start {
                return Ok(s);
            }
        }
        let lvl = &self.levels[&depth];
        Ok(lvl.staircase_up.or(lvl.hero_start_hint()).unwrap_or_default())
    }

    /// Initial hostiles for a freshly entered level.
    fn populate(&mut self, depth: u32) {
        let count = self.spawn_rng.random_range(1..=3);
        for _ in 0..count {
            if let Some(p) = self.random_spawn_spot() {
                let species = self.pick_species();
                let m = self.make_monster(species, p);
                self.levels.get_mut(&depth).expect("level").monsters.push(m);
            }
        }
    }

    fn pick_species(&mut self) -> Species {
        let max_level = (self.depth as i32 + self.hero.experience_level) / 2;
        let min_level = self.depth as i32 / 6;
        let candidates: Vec<Species> = Species::HOSTILE
            .into_iter()
            .filter(|s| {
                let l = self.tables.monsters.stats(*s).level;
                l >= min_level && l <= max_level
            })
            .collect();
        if candidates.is_empty() {
            return Species::HOSTILE
                .into_iter()
                .min_by_key(|s| (self.tables.monsters.stats(*s).level - max_level).abs())
                .unwrap_or(Species::Jackal);
        }
        candidates[self.spawn_rng.random_range(0..candidates.len())]
    }

    /// A floor tile out of the hero's sight and unoccupied.
    fn random_spawn_spot(&mut self) -> Option<Pos> {
        for _ in 0..20 {
            let n = self.level().rooms.len();
            let pick = self.spawn_rng.random_range(0..n);
            let room = self.level().rooms[pick];
            let p = Pos::new(
                self.spawn_rng.random_range(room.x..room.x + room.w),
                self.spawn_rng.random_range(room.y..room.y + room.h),
            );
            let lvl = self.level();
            if lvl.tile(p) == Tile::Floor
                && !lvl.vision.is_visible(p)
                && p.chebyshev(self.hero.pos) > 2
                && !self.occupied(p)
            {
                return Some(p);
            }
        }
        None
    }

    fn change_level(&mut self, new_depth: u32, out: &mut StepOutcome) {
        let pet_follows = self.pet_adjacent();
        let fresh = !self.levels.contains_key(&new_depth);
        let going_down = new_depth > self.depth;
        self.materialize(new_depth).expect("stair targets are valid depths");
        self.depth = new_depth;
        let lvl = self.level();
        let arrival = if going_down {
            lvl.staircase_up
        } else {
            lvl.staircase_down
        }
        .unwrap_or_else(|| lvl.rooms[0].center());
        // Shove anything standing on the stairs aside.
        if let Some(i) = self.level().monster_at(arrival) {
            let m_pos = self.free_spot_near(arrival);
            if let Some(np) = m_pos {
                self.level_mut().monsters[i].pos = np;
            }
        }
        self.hero.pos = arrival;
        let mut with_pet = false;
        if pet_follows {
            let spot = self.free_spot_near(arrival);
            if let (Some(pet), Some(p)) = (self.pet.as_mut(), spot) {
                pet.depth = new_depth;
                pet.monster.pos = p;
                with_pet = true;
            }
        }
        if going_down {
            let first_arrival = new_depth > self.deepest;
            self.deepest = self.deepest.max(new_depth);
            out.events.push(Event::Descended {
                depth: new_depth,
                first_arrival,
                with_pet,
            });
        } else {
            out.events.push(Event::Ascended { depth: new_depth });
        }
        if fresh {
            self.populate(new_depth);
        }
    }

    /// One turn of everything that is not the hero.
    pub fn advance_world(&mut self) -> Vec<Event> {
        let mut out = StepOutcome::default();
        if self.death.is_some() {
            return out.events;
        }
        self.move_monsters(&mut out);
        if self.death.is_none() {
            self.move_pet(&mut out);
        }
        if self.death.is_none() {
            self.hero.nutrition -= 1;
            if self.hero.nutrition <= 0 {
                self.kill_hero(DeathCause::Starvation, &mut out);
            }
        }
        if self.death.is_none() {
            let interval = (42 / (self.hero.experience_level + 2) + 1) as u64;
            if self.hero.hitpoints < self.hero.max_hitpoints && self.turn.is_multiple_of(interval) {
                self.hero.hitpoints += 1;
            }
            if self.spawn_rng.random_bool(SPAWN_CHANCE) {
                if let Some(p) = self.random_spawn_spot() {
                    let species = self.pick_species();
                    let m = self.make_monster(species, p);
                    self.level_mut().monsters.push(m);
                    out.events.push(Event::Spawned(species));
                }
            }
        }
        out.events
    }

    fn monster_can_enter(&self, from: Pos, to: Pos) -> bool {
        if !to.in_bounds() {
            return false;
        }
        let lvl = self.level();
        let t = lvl.tile(to);
        if !t.is_open_ground() || self.occupied(to) {
            return false;
        }
        let diagonal = from.x != to.x && from.y != to.y;
        !(diagonal && (t.blocks_diagonal() || lvl.tile(from).blocks_diagonal()))
    }

    fn step_toward(&mut self, from: Pos, goal: Pos) -> Option<Pos> {
        let mut best: Option<(i32, Pos)> = None;
        for (dx, dy) in dungeon::DIRECTIONS8 {
            let to = from.offset(dx, dy);
            if !self.monster_can_enter(from, to) {
                continue;
            }
            let d = to.chebyshev(goal) * 4 + ((to.x - goal.x).abs() + (to.y - goal.y).abs()).min(3);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, to));
            }
        }
        let current = from.chebyshev(goal) * 4 + ((from.x - goal.x).abs() + (from.y - goal.y).abs()).min(3);
        best.filter(|(d, _)| *d < current).map(|(_, p)| p)
    }

    fn random_step(&mut self, from: Pos) -> Option<Pos> {
        let (dx, dy) = dungeon::DIRECTIONS8[self.spawn_rng.random_range(0..8)];
        let to = from.offset(dx, dy);
        self.monster_can_enter(from, to).then_some(to)
    }

    fn move_monsters(&mut self, out: &mut StepOutcome) {
        let mut i = 0;
        while i < self.level().monsters.len() {
            if self.death.is_some() {
                return;
            }
            let (species, speed) = {
                let m = &self.level().monsters[i];
                (m.species, self.tables.monsters.stats(m.species).speed)
            };
            if self.level().monsters[i].peaceful || speed <= 0 {
                i += 1;
                continue;
            }
            self.level_mut().monsters[i].movement += speed;
            let mut alive = true;
            while alive && self.level().monsters[i].movement >= ACTION_COST && self.death.is_none() {
                self.level_mut().monsters[i].movement -= ACTION_COST;
                alive = self.monster_act(i, species, out);
            }
            if alive {
                i += 1;
            }
        }
    }

    /// Returns false if the monster died during its action.
    fn monster_act(&mut self, i: usize, species: Species, out: &mut StepOutcome) -> bool {
        let pos = self.level().monsters[i].pos;
        let stats = self.tables.monsters.stats(species).clone();
        let attacker = Fighter {
            to_hit: 10 + stats.level,
            armor_class: stats.armor_class,
            damage: stats.damage,
            damage_bonus: 0,
        };
        let hero_pos = self.hero.pos;
        if pos.chebyshev(hero_pos) == 1 {
            if stats.damage.sides == 0 {
                return true;
            }
            let defender = Fighter {
                to_hit: 0,
                armor_class: self.hero.armor_class,
                damage: Dice::new(0, 0),
                damage_bonus: 0,
            };
            let res = resolve_combat(&attacker, &defender, &mut self.combat_rng);
            out.events.push(Event::Attack {
                attacker: Combatant::Monster(species),
                defender: Combatant::Hero,
                hit: res.hit,
                damage: res.damage,
            });
            if res.hit {
                out.say(&format!("The {} bites!", species.key()));
                self.damage_hero(res.damage, DamageSource::Monster(species), out);
            } else {
                out.say(&format!("The {} misses!", species.key()));
            }
            return true;
        }
        if let Some(pet_pos) = self.pet_here().map(|p| p.pos) {
            if pos.chebyshev(pet_pos) == 1 && stats.damage.sides > 0 {
                let pet_species = self.pet_here().map(|p| p.species).expect("pet here");
                let pet_ac = self.tables.monsters.stats(pet_species).armor_class;
                let defender = Fighter {
                    to_hit: 0,
                    armor_class: pet_ac,
                    damage: Dice::new(0, 0),
                    damage_bonus: 0,
                };
                let res = resolve_combat(&attacker, &defender, &mut self.combat_rng);
                out.events.push(Event::Attack {
                    attacker: Combatant::Monster(species),
                    defender: Combatant::Pet(pet_species),
                    hit: res.hit,
                    damage: res.damage,
                });
                if res.hit {
                    self.damage_pet(res.damage, out);
                }
                return true;
            }
        }
        let next = if pos.chebyshev(hero_pos) <= MONSTER_SIGHT {
            self.step_toward(pos, hero_pos)
        } else if self.spawn_rng.random_bool(0.5) {
            self.random_step(pos)
        } else {
            None
        };
        if let Some(p) = next {
            self.level_mut().monsters[i].pos = p;
        }
        true
    }

    fn damage_pet(&mut self, amount: i32, out: &mut StepOutcome) {
        let turn = self.turn;
        let Some(pet) = self.pet.as_mut() else { return };
        pet.monster.hitpoints -= amount;
        if pet.monster.hitpoints <= 0 {
            let (species, pos, depth) = (pet.monster.species, pet.monster.pos, pet.depth);
            self.pet = None;
            if let Some(lvl) = self.levels.get_mut(&depth) {
                lvl.objects.push((pos, FloorObject::Item(Item::corpse(species, turn))));
            }
            out.events.push(Event::PetDied);
            out.say(&format!("You have a sad feeling for a moment, then it passes. Your {} is killed!", species.key()));
        }
    }

    fn move_pet(&mut self, out: &mut StepOutcome) {
        let Some(pet) = self.pet_here() else { return };
        let species = pet.species;
        let stats = self.tables.monsters.stats(species).clone();
        if let Some(p) = self.pet.as_mut() {
            p.monster.movement += stats.speed;
        }
        loop {
            let Some(pet) = self.pet.as_mut() else { return };
            if pet.monster.movement < ACTION_COST || self.death.is_some() {
                return;
            }
            pet.monster.movement -= ACTION_COST;
            let pos = pet.monster.pos;
            let target = self
                .level()
                .monsters
                .iter()
                .position(|m| !m.peaceful && m.pos.chebyshev(pos) == 1);
            if let Some(idx) = target {
                let victim = self.level().monsters[idx].species;
                let attacker = Fighter {
                    to_hit: 10 + stats.level,
                    armor_class: stats.armor_class,
                    damage: stats.damage,
                    damage_bonus: 0,
                };
                let defender = Fighter {
                    to_hit: 0,
                    armor_class: self.tables.monsters.stats(victim).armor_class,
                    damage: Dice::new(0, 0),
                    damage_bonus: 0,
                };
                let res = resolve_combat(&attacker, &defender, &mut self.combat_rng);
                out.events.push(Event::Attack {
                    attacker: Combatant::Pet(species),
                    defender: Combatant::Monster(victim),
                    hit: res.hit,
                    damage: res.damage,
                });
                if res.hit {
                    self.level_mut().monsters[idx].hitpoints -= res.damage;
                    if self.level().monsters[idx].hitpoints <= 0 {
                        out.say(&format!("Your {} kills the {}.", species.key(), victim.key()));
                        self.monster_dies(idx, false, out);
                    }
                }
                continue;
            }
            let next = if pos.chebyshev(self.hero.pos) > 2 {
                self.step_toward(pos, self.hero.pos)
            } else {
                self.random_step(pos)
                    .filter(|p| p.chebyshev(self.hero.pos) <= 2)
            };
            if let (Some(p), Some(pet)) = (next, self.pet.as_mut()) {
                pet.monster.pos = p;
            }
        }
    }

    fn update_vision(&mut self) {
        let depth = self.depth;
        let hero = self.hero.pos;
        let lvl = self.levels.get_mut(&depth).expect("current level");
        let visible = observe::compute_fov(lvl, hero);
        let memory: Vec<(usize, GlyphId)> = visible
            .iter()
            .map(|&i| (i, lvl.object_glyph(Pos::from_index(i))))
            .collect();
        lvl.vision.update(&visible, &memory);
    }
}

impl Level {
    fn hero_start_hint(&self) -> Option<Pos> {
        self.rooms.first().map(|r| r.center())
    }
}

impl CharacterSpec {
    fn alignment_word(&self) -> &'static str {
        match self.alignment.as_str() {
            "law" => "lawful",
            "cha" => "chaotic",
            _ => "neutral",
        }
    }
}

fn death_message(cause: DeathCause) -> String {
    match cause {
        DeathCause::Starvation => "You die from starvation.".into(),
        DeathCause::Trap => "You die...".into(),
        DeathCause::FoodPoisoning => "You die from food poisoning.".into(),
        DeathCause::KickedWall => "You die... kicking a wall.".into(),
        DeathCause::Monster(s) => format!("You die... killed by a {}.", s.key()),
    }
}
