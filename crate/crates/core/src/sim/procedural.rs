//! Seeded multi-room apartments for batch evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode::EpisodeSpec;
use super::ground_truth::shortest_path_length;
use super::scene::{Aabb, Scene, SceneObject};
use crate::geometry::Vec2;

const WALL_T: f64 = 0.1;
const WALL_H: f64 = 2.5;

const ROOM_TYPES: [(&str, &[&str]); 6] = [
    ("bedroom", &["bed", "dresser", "nightstand", "wardrobe"]),
    ("kitchen", &["oven", "refrigerator", "sink", "stove"]),
    ("living room", &["sofa", "tv", "fireplace"]),
    ("bathroom", &["toilet", "bathtub", "shower"]),
    ("office", &["desk", "bookshelf"]),
    ("dining room", &["dining table"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ProceduralConfig {
    pub width: (f64, f64),
    pub depth: (f64, f64),
    pub door_width: (f64, f64),
    pub max_steps: usize,
    pub agent_radius: f64,
    pub success_distance: f64,
    pub num_headings: usize,
}

impl Default for ProceduralConfig {
    fn default() -> Self {
        Self {
            width: (6.0, 8.0),
            depth: (5.0, 7.0),
            door_width: (1.0, 1.3),
            max_steps: 30,
            agent_radius: 0.15,
            success_distance: 1.0,
            num_headings: 12,
        }
    }
}

/// Axis-aligned room interior `[x0, y0, x1, y1]`.
type Rect = [f64; 4];

struct Door {
    center: Vec2,
}

/// Wall along x = `x` from `y0` to `y1` with a gap of `gap` meters.
fn vertical_wall(
    rng: &mut ChaCha8Rng,
    x: f64,
    y0: f64,
    y1: f64,
    gap: f64,
    walls: &mut Vec<Aabb>,
) -> Door {
    let g0 = rng.gen_range(y0 + 0.3..y1 - 0.3 - gap);
    let h = x - WALL_T / 2.0..x + WALL_T / 2.0;
    if g0 > y0 {
        walls.push(Aabb::new([h.start, y0, 0.0], [h.end, g0, WALL_H]));
    }
    walls.push(Aabb::new([h.start, g0 + gap, 0.0], [h.end, y1, WALL_H]));
    Door {
        center: Vec2::new(x, g0 + gap / 2.0),
    }
}

fn horizontal_wall(
    rng: &mut ChaCha8Rng,
    y: f64,
    x0: f64,
    x1: f64,
    gap: f64,
    walls: &mut Vec<Aabb>,
) -> Door {
    let g0 = rng.gen_range(x0 + 0.3..x1 - 0.3 - gap);
    let v = y - WALL_T / 2.0..y + WALL_T / 2.0;
    if g0 > x0 {
        walls.push(Aabb::new([x0, v.start, 0.0], [g0, v.end, WALL_H]));
    }
    walls.push(Aabb::new([g0 + gap, v.start, 0.0], [x1, v.end, WALL_H]));
    Door {
        center: Vec2::new(g0 + gap / 2.0, y),
    }
}

/// Box against a random side of `room`, kept clear of every door.
fn place_object(rng: &mut ChaCha8Rng, room: Rect, doors: &[Door], placed: &[Aabb]) -> Option<Aabb> {
    for _ in 0..50 {
        let (w, d) = (rng.gen_range(0.5..1.2), rng.gen_range(0.4..0.9));
        let h = rng.gen_range(0.5..1.2);
        let [x0, y0, x1, y1] = room;
        let (bx0, by0, bx1, by1) = match rng.gen_range(0..4) {
            0 => {
                let x = rng.gen_range(x0 + 0.05..x1 - w - 0.05);
                (x, y0 + 0.05, x + w, y0 + 0.05 + d)
            }
            1 => {
                let x = rng.gen_range(x0 + 0.05..x1 - w - 0.05);
                (x, y1 - 0.05 - d, x + w, y1 - 0.05)
            }
            2 => {
                let y = rng.gen_range(y0 + 0.05..y1 - w - 0.05);
                (x0 + 0.05, y, x0 + 0.05 + d, y + w)
            }
            _ => {
                let y = rng.gen_range(y0 + 0.05..y1 - w - 0.05);
                (x1 - 0.05 - d, y, x1 - 0.05, y + w)
            }
        };
        let b = Aabb::new([bx0, by0, 0.0], [bx1, by1, h]);
        let near_door = doors.iter().any(|dr| b.footprint_distance(dr.center) < 1.2);
        let overlaps = placed.iter().any(|o| {
            b.min[0] < o.max[0] + 0.6
                && o.min[0] < b.max[0] + 0.6
                && b.min[1] < o.max[1] + 0.6
                && o.min[1] < b.max[1] + 0.6
        });
        if !near_door && !overlaps {
            return Some(b);
        }
    }
    None
}

fn random_free_point(
    rng: &mut ChaCha8Rng,
    scene: &Scene,
    room: Rect,
    clearance: f64,
) -> Option<Vec2> {
    for _ in 0..200 {
        let p = Vec2::new(
            rng.gen_range(room[0]..room[2]),
            rng.gen_range(room[1]..room[3]),
        );
        if scene.clearance(p, &[]) >= clearance {
            return Some(p);
        }
    }
    None
}

fn try_generate(
    rng: &mut ChaCha8Rng,
    cfg: &ProceduralConfig,
) -> Option<(Scene, Vec<Rect>, Vec<&'static str>)> {
    let w = rng.gen_range(cfg.width.0..cfg.width.1);
    let h = rng.gen_range(cfg.depth.0..cfg.depth.1);
    let mut scene = Scene::new([0.0, 0.0, w, h]);
    let mut doors = Vec::new();
    let xs = w * rng.gen_range(0.4..0.6);
    let gap = rng.gen_range(cfg.door_width.0..cfg.door_width.1);
    doors.push(vertical_wall(rng, xs, 0.0, h, gap, &mut scene.walls));
    let mut rooms: Vec<Rect> = vec![[0.0, 0.0, xs, h], [xs, 0.0, w, h]];
    if rng.gen_bool(0.6) {
        // split one side into two rooms
        let side = rng.gen_range(0..2);
        let [x0, _, x1, _] = rooms[side];
        let ys = h * rng.gen_range(0.4..0.6);
        let gap = rng.gen_range(cfg.door_width.0..cfg.door_width.1);
        doors.push(horizontal_wall(rng, ys, x0, x1, gap, &mut scene.walls));
        rooms[side] = [x0, 0.0, x1, ys];
        rooms.push([x0, ys, x1, h]);
    }
    let interiors: Vec<Rect> = rooms
        .iter()
        .map(|r| {
            let sh = |v: f64, lo: bool| {
                let on_wall = v != 0.0 && v != w && v != h;
                match (on_wall, lo) {
                    (true, true) => v + WALL_T / 2.0,
                    (true, false) => v - WALL_T / 2.0,
                    _ => v,
                }
            };
            [
                sh(r[0], true),
                sh(r[1], true),
                sh(r[2], false),
                sh(r[3], false),
            ]
        })
        .collect();
    let mut types: Vec<usize> = (0..ROOM_TYPES.len()).collect();
    types.shuffle(rng);
    let mut kinds = Vec::new();
    let mut placed = Vec::new();
    for (room, &t) in interiors.iter().zip(&types) {
        let (kind, classes) = ROOM_TYPES[t];
        kinds.push(kind);
        let mut pool: Vec<&str> = classes.to_vec();
        pool.shuffle(rng);
        let count = rng.gen_range(1..=2.min(pool.len()));
        for class in pool.into_iter().take(count) {
            let b = place_object(rng, *room, &doors, &placed)?;
            placed.push(b);
            scene.objects.push(SceneObject {
                class: class.to_string(),
                bbox: b,
            });
        }
    }
    scene.validate().ok()?;
    Some((scene, interiors, kinds))
}

/// One solvable episode: the start lies in a different room from every
/// instance of the target.
pub fn generate_episode(seed: u64, cfg: &ProceduralConfig) -> EpisodeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let Some((scene, rooms, _)) = try_generate(&mut rng, cfg) else {
            continue;
        };
        let start_room = rng.gen_range(0..rooms.len());
        let r = rooms[start_room];
        let inside =
            |b: &Aabb| b.min[0] >= r[0] && b.max[0] <= r[2] && b.min[1] >= r[1] && b.max[1] <= r[3];
        let mut targets: Vec<&str> = scene
            .objects
            .iter()
            .filter(|o| !scene.instances(&o.class).any(&inside))
            .map(|o| o.class.as_str())
            .collect();
        targets.sort_unstable();
        targets.dedup();
        let Some(&target) = targets.choose(&mut rng) else {
            continue;
        };
        let Some(start) = random_free_point(&mut rng, &scene, rooms[start_room], 0.5) else {
            continue;
        };
        if scene.distance_to_class(start, target).unwrap_or(0.0) <= cfg.success_distance {
            continue;
        }
        let l = shortest_path_length(
            &scene,
            &[],
            start,
            target,
            cfg.agent_radius,
            0.05,
            cfg.success_distance,
        );
        if l.is_none() {
            continue;
        }
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let target = target.to_string();
        return EpisodeSpec {
            name: format!("proc-{seed}"),
            scene,
            start: [start.x, start.y, yaw],
            target,
            max_steps: cfg.max_steps,
            success_distance: cfg.success_distance,
            num_headings: cfg.num_headings,
            seed,
        };
    }
}

/// `count` episodes; episode `i` depends only on `(seed, i)`.
pub fn generate_batch(seed: u64, count: usize, cfg: &ProceduralConfig) -> Vec<EpisodeSpec> {
    (0..count as u64)
        .map(|i| generate_episode(seed.wrapping_mul(1_000_003).wrapping_add(i), cfg))
        .collect()
}
