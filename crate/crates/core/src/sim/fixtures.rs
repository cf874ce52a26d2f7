//! Hand-built scenes with known traces.

use super::episode::EpisodeSpec;
use super::scene::Scene;

pub const ONE_ROOM: &str = include_str!("../../data/scenes/one_room.json");
pub const TWO_ROOM_HALLWAY: &str = include_str!("../../data/scenes/two_room_hallway.json");
pub const CORRIDOR_REVISIT: &str = include_str!("../../data/scenes/corridor_revisit.json");
pub const RAMP_CROSSING: &str = include_str!("../../data/scenes/ramp_crossing.json");

/// First stored episode of a bundled scene.
fn first_episode(name: &str, json: &str, max_steps: usize) -> EpisodeSpec {
    let scene = Scene::from_json(json).expect("bundled scene parses");
    let def = scene.episodes[0].clone();
    let mut spec = EpisodeSpec::new(scene, def.start, &def.target, max_steps);
    spec.name = name.to_string();
    spec
}

/// 4 × 4 m room, target in view from the start.
pub fn one_room() -> EpisodeSpec {
    first_episode("one_room", ONE_ROOM, 10)
}

/// Hallway between a decoy room and the target room; the target cannot be
/// seen until the agent reaches the second door.
pub fn two_room_hallway() -> EpisodeSpec {
    first_episode("two_room_hallway", TWO_ROOM_HALLWAY, 40)
}

/// Long corridor lined with side rooms, target at the far end.
pub fn corridor_revisit() -> EpisodeSpec {
    first_episode("corridor_revisit", CORRIDOR_REVISIT, 60)
}

/// 6 × 3 m room split by a full-width ramp; only passable when `ramp` is a
/// walkable class.
pub fn ramp_crossing() -> EpisodeSpec {
    first_episode("ramp_crossing", RAMP_CROSSING, 10)
}
