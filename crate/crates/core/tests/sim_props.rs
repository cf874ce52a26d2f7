use std::f64::consts::TAU;

use objnav_core::geometry::Vec2;
use objnav_core::oracle::{RoomTable, ScriptedOracle};
use objnav_core::sim::{
    compute_metrics, fixtures, render_panorama, run_batch, run_episode, Aabb, EpisodeConfig,
    EpisodeResult, EpisodeSpec, Outcome, RenderConfig, Scene, SceneObject, SimError,
};
use proptest::prelude::*;

/// Nearest positive hit of `o + t·d` on the faces of a box, found by
/// intersecting each face plane and testing the hit against the face
/// rectangle.
fn face_hit(min: [f64; 3], max: [f64; 3], o: [f64; 3], d: [f64; 3]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..3 {
        if d[axis] == 0.0 {
            continue;
        }
        for plane in [min[axis], max[axis]] {
            let t = (plane - o[axis]) / d[axis];
            if t <= 0.0 {
                continue;
            }
            let on_face = (0..3).filter(|&k| k != axis).all(|k| {
                let x = o[k] + t * d[k];
                x >= min[k] - 1e-12 && x <= max[k] + 1e-12
            });
            if on_face && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Expected depth of one ray: nearest box face, else the room floor or side
/// walls; leaving through the top of the room is a miss.
fn expected_depth(scene: &Scene, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
    let [x0, y0, x1, y1] = scene.bounds;
    let mut exit = f64::INFINITY;
    let mut through_top = false;
    for (axis, lo, hi) in [(0, x0, x1), (1, y0, y1), (2, 0.0, scene.wall_height)] {
        if d[axis] == 0.0 {
            continue;
        }
        let plane = if d[axis] > 0.0 { hi } else { lo };
        let t = (plane - o[axis]) / d[axis];
        if t < exit {
            exit = t;
            through_top = axis == 2 && d[2] > 0.0;
        }
    }
    let boxes = scene
        .walls
        .iter()
        .chain(scene.objects.iter().map(|o| &o.bbox));
    let hit = boxes
        .filter_map(|b| face_hit(b.min, b.max, o, d))
        .fold(f64::INFINITY, f64::min);
    if hit < exit {
        Some(hit)
    } else if through_top {
        None
    } else {
        Some(exit)
    }
}

/// Ray through pixel `(u, v)` of a level camera looking along `yaw`:
/// image x to the right, image y down, unit forward component.
fn pixel_ray(u: f64, v: f64, fx: f64, fy: f64, cx: f64, cy: f64, yaw: f64) -> [f64; 3] {
    let a = (u - cx) / fx;
    let b = (v - cy) / fy;
    let (s, c) = yaw.sin_cos();
    [c + a * s, s - a * c, -b]
}

fn random_scene() -> impl Strategy<Value = (Scene, f64, f64)> {
    let boxes = prop::collection::vec(
        (
            0.2..5.8f64,
            0.2..5.8f64,
            0.1..1.5f64,
            0.1..1.5f64,
            0.0..0.5f64,
            0.2..2.5f64,
        ),
        0..6,
    );
    (boxes, 0.3..5.7f64, 0.3..5.7f64)
        .prop_map(|(boxes, x, y)| {
            let mut s = Scene::new([0.0, 0.0, 6.0, 6.0]);
            for (k, (bx, by, w, h, z0, zh)) in boxes.into_iter().enumerate() {
                let b = Aabb::new(
                    [bx, by, z0],
                    [
                        (bx + w).min(6.0),
                        (by + h).min(6.0),
                        (z0 + zh).min(s.wall_height),
                    ],
                );
                if k % 2 == 0 {
                    s.walls.push(b);
                } else {
                    s.objects.push(SceneObject {
                        class: format!("thing{k}"),
                        bbox: b,
                    });
                }
            }
            (s, x, y)
        })
        .prop_filter("eye outside boxes", |(s, x, y)| {
            let eye = [*x, *y, RenderConfig::default().camera_height];
            !s.walls
                .iter()
                .chain(s.objects.iter().map(|o| &o.bbox))
                .any(|b| (0..3).all(|k| eye[k] >= b.min[k] - 1e-3 && eye[k] <= b.max[k] + 1e-3))
        })
}

fn small_render() -> RenderConfig {
    RenderConfig {
        width: 12,
        height: 16,
        ..RenderConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendered_depth_matches_face_intersection((scene, x, y) in random_scene(), headings in 3usize..13) {
        let cfg = small_render();
        let frames = render_panorama(&scene, &scene.vocabulary(), x, y, headings, &cfg).unwrap();
        prop_assert_eq!(frames.len(), headings);
        for (h, f) in frames.iter().enumerate() {
            let k = &f.intrinsics;
            let yaw = TAU * h as f64 / headings as f64;
            let o = [x, y, cfg.camera_height];
            for v in 0..k.height {
                for u in 0..k.width {
                    let d = pixel_ray(u as f64, v as f64, k.fx, k.fy, k.cx, k.cy, yaw);
                    let got = f.depth[v * k.width + u];
                    match expected_depth(&scene, o, d).filter(|&t| t <= cfg.max_depth) {
                        Some(t) => prop_assert!((got - t).abs() <= 1e-6, "pixel ({}, {}) of view {}: {} vs {}", u, v, h, got, t),
                        None => prop_assert_eq!(got, 0.0),
                    }
                }
            }
        }
    }

    #[test]
    fn rendering_is_bit_identical((scene, x, y) in random_scene()) {
        let cfg = small_render();
        let vocab = scene.vocabulary();
        let a = render_panorama(&scene, &vocab, x, y, 12, &cfg).unwrap();
        let b = render_panorama(&scene, &vocab, x, y, 12, &cfg).unwrap();
        for (fa, fb) in a.iter().zip(&b) {
            prop_assert!(fa.depth.iter().zip(&fb.depth).all(|(p, q)| p.to_bits() == q.to_bits()));
            prop_assert_eq!(&fa.labels, &fb.labels);
            prop_assert_eq!(&fa.color, &fb.color);
        }
    }

    #[test]
    fn metric_bounds(outcomes in prop::collection::vec((any::<bool>(), 0.0..50.0f64, 0.0..50.0f64, 0.0..20.0f64), 1..40)) {
        let outcomes: Vec<Outcome> = outcomes
            .into_iter()
            .map(|(success, path_length, shortest_length, dtg)| Outcome { success, path_length, shortest_length, dtg })
            .collect();
        let m = compute_metrics(&outcomes).unwrap();
        prop_assert!(0.0 <= m.spl && m.spl <= m.sr + 1e-12 && m.sr <= 1.0);
        prop_assert!(m.dtg >= 0.0);
    }
}

#[test]
fn perpendicular_wall_depth() {
    let scene = Scene::new([0.0, 0.0, 4.0, 4.0]);
    let cfg = RenderConfig {
        width: 33,
        height: 33,
        hfov: Some(60f64.to_radians()),
        ..RenderConfig::default()
    };
    let frames = render_panorama(&scene, &scene.vocabulary(), 2.0, 2.0, 4, &cfg).unwrap();
    let f = &frames[0];
    let k = &f.intrinsics;
    let center = (k.cy as usize) * k.width + k.cx as usize;
    assert!((f.depth[center] - 2.0).abs() < 1e-6);
}

#[test]
fn occluding_object_label_wins() {
    let mut scene = Scene::new([0.0, 0.0, 6.0, 4.0]);
    scene.objects.push(SceneObject {
        class: "cabinet".into(),
        bbox: Aabb::new([3.0, 1.5, 0.0], [3.5, 2.5, 2.0]),
    });
    let vocab = scene.vocabulary();
    let cfg = RenderConfig {
        width: 9,
        height: 9,
        hfov: Some(20f64.to_radians()),
        vfov: 20f64.to_radians(),
        ..RenderConfig::default()
    };
    let frames = render_panorama(&scene, &vocab, 1.0, 2.0, 4, &cfg).unwrap();
    let f = &frames[0];
    let center = 4 * 9 + 4;
    assert_eq!(f.labels[center], vocab.id("cabinet").unwrap());
    assert!((f.depth[center] - 2.0).abs() < 1e-6);
}

#[test]
fn pose_inside_geometry_rejected() {
    let mut scene = Scene::new([0.0, 0.0, 4.0, 4.0]);
    scene
        .walls
        .push(Aabb::new([1.0, 1.0, 0.0], [2.0, 2.0, 2.5]));
    let vocab = scene.vocabulary();
    let cfg = RenderConfig::default();
    assert!(matches!(
        render_panorama(&scene, &vocab, 1.5, 1.5, 12, &cfg),
        Err(SimError::PoseInsideGeometry { .. })
    ));
    assert!(render_panorama(&scene, &vocab, 5.0, 1.0, 12, &cfg).is_err());
    assert!(matches!(
        render_panorama(&scene, &vocab, 3.0, 3.0, 2, &cfg),
        Err(SimError::InvalidConfig(_))
    ));
}

#[test]
fn hand_computed_metrics() {
    let o = |success, path_length, shortest_length, dtg| Outcome {
        success,
        path_length,
        shortest_length,
        dtg,
    };
    let m = compute_metrics(&[o(true, 10.0, 5.0, 0.4)]).unwrap();
    assert!((m.spl - 0.5).abs() < 1e-12);
    let m = compute_metrics(&[o(false, 3.0, 5.0, 2.5)]).unwrap();
    assert_eq!((m.sr, m.spl, m.dtg), (0.0, 0.0, 2.5));
    // p below l counts as l
    let batch = [
        o(true, 4.0, 4.0, 0.2),
        o(true, 3.9, 4.0, 0.8),
        o(false, 7.0, 2.0, 3.0),
        o(true, 8.0, 2.0, 0.5),
    ];
    let m = compute_metrics(&batch).unwrap();
    assert!((m.sr - 0.75).abs() < 1e-12);
    assert!((m.spl - (1.0 + 1.0 + 0.0 + 0.25) / 4.0).abs() < 1e-12);
    assert!((m.dtg - 4.5 / 4.0).abs() < 1e-12);
    assert!(matches!(compute_metrics(&[]), Err(SimError::EmptyBatch)));
}

fn run(spec: &EpisodeSpec, cfg: &EpisodeConfig) -> EpisodeResult {
    run_episode(spec, cfg, &ScriptedOracle::default(), &RoomTable::default()).unwrap()
}

fn log_bytes(r: &EpisodeResult) -> Vec<u8> {
    let mut buf = Vec::new();
    r.write_log(&mut buf).unwrap();
    buf
}

fn assert_clear(spec: &EpisodeSpec, cfg: &EpisodeConfig, r: &EpisodeResult) {
    for p in &r.trajectory {
        let c = spec
            .scene
            .clearance(Vec2::new(p[0], p[1]), &cfg.nav_class_names);
        assert!(
            c >= cfg.agent_radius,
            "({:.2}, {:.2}) has clearance {c:.3}",
            p[0],
            p[1]
        );
    }
}

#[test]
fn one_room_single_waypoint() {
    let spec = fixtures::one_room();
    let cfg = EpisodeConfig::default();
    let r = run(&spec, &cfg);
    assert!(r.success);
    let ratio = r.path_length / r.shortest_length;
    assert!((1.0..=1.5).contains(&ratio), "p/l = {ratio}");
    assert!(r.shortest_length <= r.path_length && r.dtg >= 0.0);
    assert_clear(&spec, &cfg, &r);
}

#[test]
fn zero_budget_fails_in_place() {
    let mut spec = fixtures::one_room();
    spec.max_steps = 0;
    let r = run(&spec, &EpisodeConfig::default());
    assert!(!r.success);
    assert_eq!(r.path_length, 0.0);
    let start = Vec2::new(spec.start[0], spec.start[1]);
    assert_eq!(
        r.dtg,
        spec.scene.distance_to_class(start, &spec.target).unwrap()
    );
    assert!(r.log.is_empty());
}

#[test]
fn episode_logs_are_byte_identical() {
    let spec = fixtures::one_room();
    let cfg = EpisodeConfig::default();
    let a = run(&spec, &cfg);
    let b = run(&spec, &cfg);
    assert_eq!(log_bytes(&a), log_bytes(&b));
    let batch = run_batch(&[spec.clone(), spec], &cfg, &ScriptedOracle::default(), 2);
    for r in batch {
        assert_eq!(log_bytes(&r.unwrap()), log_bytes(&a));
    }
}

#[test]
fn log_records_carry_required_keys() {
    let r = run(&fixtures::one_room(), &EpisodeConfig::default());
    let text = String::from_utf8(log_bytes(&r)).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in [
            "step",
            "pose",
            "phase",
            "decision",
            "waypoint",
            "node_count",
            "frontier_count",
        ] {
            assert!(v.get(key).is_some(), "missing {key} in {line}");
        }
    }
}

#[test]
fn two_rooms_need_a_second_node() {
    let spec = fixtures::two_room_hallway();
    let cfg = EpisodeConfig::default();
    let r = run(&spec, &cfg);
    assert!(r.success);
    assert!(r.steps <= spec.max_steps);
    let mut nodes: Vec<_> = r.log.iter().map(|s| s.node).collect();
    nodes.sort_unstable();
    nodes.dedup();
    assert!(nodes.len() >= 2, "visited {nodes:?}");
    assert_clear(&spec, &cfg, &r);
}

#[test]
fn ramp_is_crossed_only_when_walkable() {
    let spec = fixtures::ramp_crossing();
    let cfg = EpisodeConfig {
        nav_class_names: vec!["ramp".into()],
        ..EpisodeConfig::default()
    };
    let r = run(&spec, &cfg);
    assert!(r.success, "dtg {:.2}, events {:?}", r.dtg, r.events);
    assert!(r.trajectory.iter().any(|p| p[0] > 2.6 && p[0] < 3.4));
    assert_clear(&spec, &cfg, &r);

    let blocked = run_episode(
        &spec,
        &EpisodeConfig::default(),
        &ScriptedOracle::default(),
        &RoomTable::default(),
    );
    assert!(matches!(blocked, Err(SimError::Unsolvable(_))));
}
