mod common;

use common::{clear_level, new_game, room};
use delve::action::{Action, Direction};
use delve::dungeon::{Pos, Tile, DoorState, MAP_HEIGHT, MAP_TILES, MAP_WIDTH};
use delve::engine::Pet;
use delve::entity::{oclass, Species};
use delve::glyph::{self, MAX_GLYPH};
use delve::observe::*;

#[test]
fn shapes_and_bounds() {
    let mut g = new_game(1, 1);
    for i in 0..200 {
        let obs = render_observation(&g);
        assert_eq!(obs.glyphs.len(), MAP_HEIGHT * MAP_WIDTH);
        assert_eq!(obs.chars.len(), 21 * 79);
        assert_eq!(obs.colors.len(), 21 * 79);
        assert_eq!(obs.specials.len(), 21 * 79);
        assert_eq!(obs.blstats.len(), 25);
        assert_eq!(obs.message.len(), 256);
        assert_eq!(obs.inv_glyphs.len(), 55);
        assert_eq!(obs.inv_strs.len(), 55 * 80);
        assert_eq!(obs.inv_letters.len(), 55);
        assert_eq!(obs.inv_oclasses.len(), 55);
        assert!(obs.glyphs.iter().all(|&g| (0..=MAX_GLYPH as i16).contains(&g)));
        assert!(obs.chars.iter().all(|&c| c <= 127));
        assert!(obs.colors.iter().all(|&c| c <= 15));
        assert!(obs.message.iter().all(|&c| c <= MESSAGE_PAD));
        let n = g.inventory().len();
        assert!(obs.inv_glyphs[n..].iter().all(|&x| x == MAX_GLYPH as i16));
        assert!(obs.inv_oclasses[n..].iter().all(|&x| x == oclass::MAXOCLASSES));
        assert!(obs.inv_letters[n..].iter().all(|&x| x == 0));
        assert!(obs.inv_strs[n * 80..].iter().all(|&x| x == 0));
        let act = Action::all()[(i * 5) % 27];
        if g.apply_action(act).is_err() {
            break;
        }
    }
}

#[test]
fn hero_glyph_at_blstats_position() {
    let g = new_game(8, 8);
    let obs = render_observation(&g);
    let p = Pos::new(obs.blstats[bl::X], obs.blstats[bl::Y]);
    assert_eq!(obs.glyph_at(p), glyph::HERO.0 as i16);
    assert_eq!(obs.chars[p.index()], b'@');
    assert_eq!(obs.blstats[bl::TIME], 1);
    assert_eq!(obs.blstats[bl::DEPTH], 1);
    assert_eq!(obs.blstats[bl::SCORE], g.score() as i32);
}

#[test]
fn render_is_pure() {
    let g = new_game(4, 9);
    let fp = g.fingerprint();
    let a = render_observation(&g);
    let b = render_observation(&g);
    assert_eq!(a, b);
    assert_eq!(fp, g.fingerprint());
}

#[test]
fn pet_flag_only_on_pet_tile() {
    let g = new_game(2, 3);
    let pet = g.pet_here().expect("pet at start").pos;
    let obs = render_observation(&g);
    for i in 0..MAP_TILES {
        let expected = if i == pet.index() { SPECIAL_PET } else { 0 };
        assert_eq!(obs.specials[i], expected, "tile {i}");
    }
}

#[test]
fn lit_room_fully_visible() {
    let mut g = new_game(1, 1);
    let r = room(20, 5, 5, 4, true);
    clear_level(&mut g, &[r]);
    g.hero_mut().pos = Pos::new(22, 6);
    g.refresh_vision();
    let obs = render_observation(&g);
    let lvl = g.level();
    let floor: Vec<Pos> = r.tiles().collect();
    assert_eq!(floor.len(), 20);
    assert!(floor.iter().all(|p| lvl.vision.is_visible(*p)));
    // walls too
    assert!(lvl.vision.is_visible(Pos::new(19, 4)));
    assert!(lvl.vision.is_visible(Pos::new(25, 9)));
    assert_eq!(obs.glyph_at(Pos::new(19, 6)), glyph::WALL_VERTICAL.0 as i16);
    assert_eq!(obs.glyph_at(Pos::new(21, 7)), glyph::FLOOR_LIT.0 as i16);
    assert_eq!(lvl.vision.seen_count(), 7 * 6);
}

#[test]
fn corridor_sees_only_neighbors() {
    let mut g = new_game(1, 1);
    clear_level(&mut g, &[room(40, 5, 5, 4, true)]);
    for x in 5..15 {
        g.level_mut().set_tile(Pos::new(x, 15), Tile::Corridor);
    }
    g.hero_mut().pos = Pos::new(10, 15);
    g.refresh_vision();
    let v = &g.level().vision;
    let visible = (0..MAP_TILES).filter(|&i| v.is_visible(Pos::from_index(i))).count();
    assert!(visible <= 9);
    assert_eq!(visible, 9);
}

#[test]
fn left_room_is_remembered_gray() {
    let mut g = new_game(1, 1);
    let r = room(20, 5, 5, 4, true);
    clear_level(&mut g, &[r]);
    g.level_mut().set_tile(
        Pos::new(25, 6),
        Tile::Door {
            state: DoorState::Broken,
            in_vertical_wall: true,
        },
    );
    for x in 26..35 {
        g.level_mut().set_tile(Pos::new(x, 6), Tile::Corridor);
    }
    g.hero_mut().pos = Pos::new(24, 6);
    g.hero_mut().nutrition = 5000;
    g.refresh_vision();
    for _ in 0..4 {
        g.apply_action(Action::Move(Direction::East)).unwrap();
    }
    assert_eq!(g.hero().pos, Pos::new(28, 6));
    let obs = render_observation(&g);
    let p = Pos::new(21, 7);
    assert_eq!(g.level().vision.get(p), TileVisibility::Remembered);
    assert_eq!(obs.glyph_at(p), glyph::FLOOR_REMEMBERED.0 as i16);
    assert_eq!(obs.colors[p.index()], glyph::color::GRAY);
    let unseen = Pos::new(60, 15);
    assert_eq!(obs.glyph_at(unseen), glyph::UNEXPLORED.0 as i16);
    assert_eq!(obs.chars[unseen.index()], b' ');
    assert_eq!(obs.colors[unseen.index()], 0);
}

#[test]
fn visible_monster_beats_item() {
    let mut g = new_game(1, 1);
    clear_level(&mut g, &[room(20, 5, 8, 5, true)]);
    g.hero_mut().pos = Pos::new(21, 6);
    let p = Pos::new(25, 7);
    g.level_mut().objects.push((
        p,
        delve::entity::FloorObject::Gold(5),
    ));
    g.refresh_vision();
    assert_eq!(render_observation(&g).glyph_at(p), glyph::GOLD_PILE.0 as i16);
    g.place_monster(Species::Newt, p);
    assert_eq!(render_observation(&g).glyph_at(p), Species::Newt.glyph().0 as i16);
}

#[test]
fn pet_bit_follows_pet() {
    let mut g = new_game(1, 1);
    clear_level(&mut g, &[room(20, 5, 8, 5, true)]);
    g.hero_mut().pos = Pos::new(21, 6);
    let pet = g.pet().cloned();
    assert!(pet.is_none());
    let mut other = new_game(1, 1);
    let mut pet: Pet = other.pet_mut().unwrap().clone();
    pet.monster.pos = Pos::new(22, 6);
    g.set_pet(Some(pet));
    g.refresh_vision();
    let obs = render_observation(&g);
    assert_eq!(obs.specials[Pos::new(22, 6).index()], SPECIAL_PET);
    assert_eq!(obs.specials.iter().filter(|&&s| s != 0).count(), 1);
}

#[test]
fn inventory_arrays() {
    let g = new_game(1, 1);
    let obs = render_observation(&g);
    assert_eq!(obs.inv_letters[0], b'a');
    assert_eq!(obs.inv_oclasses[0], oclass::FOOD);
    let s: Vec<u8> = obs.inv_strs[..80].iter().copied().take_while(|&b| b != 0).collect();
    assert_eq!(String::from_utf8(s).unwrap(), "3 food rations");
}

#[test]
fn flat_buffer_follows_layout() {
    let g = new_game(3, 3);
    let obs = render_observation(&g);
    let flat = obs.to_flat();
    let layout = parse_layout(include_str!("../data/LAYOUT")).unwrap();
    assert_eq!(flat.len(), layout.size);
    let bl_field = layout.field("blstats").unwrap();
    let off = bl_field.offset + bl::TIME * 4;
    let time = i32::from_le_bytes(flat[off..off + 4].try_into().unwrap());
    assert_eq!(time, obs.blstats[bl::TIME]);
    let gf = layout.field("glyphs").unwrap();
    let hero = g.hero().pos.index();
    let o = gf.offset + hero * 2;
    assert_eq!(i16::from_le_bytes([flat[o], flat[o + 1]]), glyph::HERO.0 as i16);
    let msg = layout.field("message").unwrap();
    assert_eq!(&flat[msg.offset..msg.offset + 256], &obs.message[..]);
}

#[test]
fn crop_center_is_hero() {
    let g = new_game(6, 6);
    let obs = render_observation(&g);
    let c = crop_glyphs(&obs.glyphs, g.hero().pos, 9).unwrap();
    assert_eq!(c[40], glyph::HERO.0 as i16);
}
