//! Brute-force reference implementations shared by the property and
//! acceptance tests. Each one is written from the formulas directly, without
//! calling the library code it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use objnav_core::geometry::{CameraIntrinsics, Pose};
use objnav_core::labels::ClassId;
use objnav_core::semantic_map::LabeledFrame;

pub fn backproject(u: f64, v: f64, d: f64, fx: f64, fy: f64, cx: f64, cy: f64) -> [f64; 3] {
    [d * (u - cx) / fx, d * (v - cy) / fy, d]
}

/// Rotates `v` by the unit quaternion `(w, x, y, z)` via `v + 2w(q×v) + 2q×(q×v)`.
pub fn rotate(q: [f64; 4], v: [f64; 3]) -> [f64; 3] {
    let [w, x, y, z] = q;
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let qv = [x, y, z];
    let t = cross(qv, v);
    let tt = cross(qv, t);
    [
        v[0] + 2.0 * w * t[0] + 2.0 * tt[0],
        v[1] + 2.0 * w * t[1] + 2.0 * tt[1],
        v[2] + 2.0 * w * t[2] + 2.0 * tt[2],
    ]
}

pub fn to_world(q: [f64; 4], p: [f64; 3], xc: [f64; 3]) -> [f64; 3] {
    let r = rotate(q, xc);
    [r[0] + p[0], r[1] + p[1], r[2] + p[2]]
}

pub fn voxel_key(p: [f64; 3], r: f64) -> (i64, i64, i64) {
    (
        (p[0] / r).floor() as i64,
        (p[1] / r).floor() as i64,
        (p[2] / r).floor() as i64,
    )
}

/// Centroid per voxel, summed in input order, sorted by voxel key.
pub fn bucket_centroids(points: &[[f64; 3]], r: f64) -> Vec<[f64; 3]> {
    let mut acc: BTreeMap<(i64, i64, i64), ([f64; 3], usize)> = BTreeMap::new();
    for &p in points {
        let e = acc.entry(voxel_key(p, r)).or_insert(([0.0; 3], 0));
        for k in 0..3 {
            e.0[k] += p[k];
        }
        e.1 += 1;
    }
    acc.values()
        .map(|(s, n)| {
            let n = *n as f64;
            [s[0] / n, s[1] / n, s[2] / n]
        })
        .collect()
}

pub fn cell_index(x: f64, y: f64, x_min: f64, y_min: f64, res: f64) -> (i64, i64) {
    (
        ((x - x_min) / res).floor() as i64,
        ((y - y_min) / res).floor() as i64,
    )
}

/// Grid values: 1 free, -1 obstacle, 0 unknown, indexed `[i][j]`.
pub fn rasterize(
    free: &[[f64; 3]],
    blocked: &[[f64; 3]],
    x_min: f64,
    y_min: f64,
    res: f64,
    nx: usize,
    ny: usize,
) -> Vec<Vec<i8>> {
    let mut g = vec![vec![0i8; ny]; nx];
    let mut put = |p: &[f64; 3], v: i8| {
        let (i, j) = cell_index(p[0], p[1], x_min, y_min, res);
        if i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny {
            let c = &mut g[i as usize][j as usize];
            if *c != -1 {
                *c = v;
            }
        }
    };
    for p in free {
        put(p, 1);
    }
    for p in blocked {
        put(p, -1);
    }
    g
}

pub fn frontier_cells(g: &[Vec<i8>]) -> Vec<(usize, usize)> {
    let nx = g.len();
    let ny = g.first().map_or(0, Vec::len);
    let at = |i: i64, j: i64| -> Option<i8> {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            None
        } else {
            Some(g[i as usize][j as usize])
        }
    };
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            if g[i][j] != 1 {
                continue;
            }
            let (i, j) = (i as i64, j as i64);
            let n = [at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1)];
            if n.contains(&Some(0)) && !n.contains(&Some(-1)) {
                out.push((i as usize, j as usize));
            }
        }
    }
    out
}

pub fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Minimum distance from each candidate to `source`, by double loop.
pub fn min_distances(candidates: &[[f64; 3]], source: &[[f64; 3]]) -> Vec<f64> {
    candidates
        .iter()
        .map(|&c| {
            source
                .iter()
                .map(|&s| dist3(c, s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn normalized(d: &[f64], eps: f64) -> Vec<f64> {
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    d.iter()
        .map(|&v| 1.0 - (v - lo) / (hi - lo + eps))
        .collect()
}

/// Planar distance from `p` to segment `a`–`b` via the clamped projection.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * abx, a[1] + t * aby);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

/// Merge predicate: closer than `d_merge` and no band obstacle within
/// `half_width` of the joining segment.
pub fn mergeable(
    a: [f64; 2],
    b: [f64; 2],
    band: &[[f64; 2]],
    d_merge: f64,
    half_width: f64,
) -> bool {
    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    d < d_merge && band.iter().all(|&o| segment_distance(o, a, b) > half_width)
}

/// Frame with the given depths and labels; colors are a function of the
/// pixel index.
pub fn frame(
    depth: Vec<f64>,
    labels: Vec<ClassId>,
    k: CameraIntrinsics,
    pose: Pose,
) -> LabeledFrame {
    let color = (0..depth.len())
        .map(|i| [(i % 251) as u8, (i % 13) as u8, 7])
        .collect();
    LabeledFrame {
        depth,
        color,
        labels,
        pose,
        intrinsics: k,
        heading_index: 0,
    }
}

use objnav_core::affordance::{
    compose_field, normalized_affordance, safety_mask, select_waypoint, AffordanceConfig, Phase,
    PhaseInputs,
};
use objnav_core::cloud::PointCloud;
use objnav_core::geometry::{Vec2, Vec3};
use objnav_core::labels::Vocabulary;
use objnav_core::topo::{NodeId, TextMask, TopoConfig, TopoContext, TopoGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, lim: f64, z: (f64, f64)) -> PointCloud {
    PointCloud::from_points(
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-lim..lim),
                    rng.gen_range(-lim..lim),
                    rng.gen_range(z.0..=z.1),
                )
            })
            .collect(),
    )
}

/// Random map layers and a graph grown in bursts with merges in between.
/// Checks fixpoint, id retention, history redirection, attribute
/// consistency, determinism and id freshness.
pub fn topo_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = rng.gen_range(2.0..6.0);
    let cfg = TopoConfig {
        r_topo: rng.gen_range(0.5..3.0),
        d_merge: rng.gen_range(0.3..1.5),
        los_half_width: rng.gen_range(0.0..0.2),
    };
    let cfg = TopoConfig {
        d_merge: cfg.d_merge.min(2.0 * cfg.r_topo),
        ..cfg
    };
    let z_floor = rng.gen_range(-0.2..0.2);
    let mut objects = std::collections::BTreeMap::new();
    for class in 2..rng.gen_range(2..6u16) {
        let n = rng.gen_range(1..20);
        objects.insert(
            class,
            random_cloud(&mut rng, n, lim, (z_floor, z_floor + 1.5)),
        );
    }
    let n_obs = rng.gen_range(0..60);
    let n_front = rng.gen_range(0..80);
    let ctx = TopoContext {
        objects,
        frontiers: random_cloud(&mut rng, n_front, lim, (z_floor, z_floor)),
        obstacles: random_cloud(&mut rng, n_obs, lim, (z_floor - 0.5, z_floor + 2.5)),
        z_floor,
        z_ceiling_offset: 1.5,
    };
    let band: Vec<[f64; 2]> = ctx
        .obstacles
        .iter()
        .filter(|p| p.z >= z_floor && p.z <= z_floor + 1.5)
        .map(|p| [p.x, p.y])
        .collect();

    let mut g = TopoGraph::new(cfg.clone()).map_err(|e| e.to_string())?;
    let mut redirect: std::collections::BTreeMap<NodeId, NodeId> = Default::default();
    let mut recorded: Vec<NodeId> = Vec::new();
    let mut max_id = 0;
    for _ in 0..rng.gen_range(1..5) {
        for _ in 0..rng.gen_range(1..12) {
            let p = Vec2::new(rng.gen_range(-lim..lim), rng.gen_range(-lim..lim));
            let id = g.create_node(p, &ctx, "room", 0);
            if id <= max_id {
                return Err(format!("id {id} reused after {max_id}"));
            }
            max_id = id;
            g.record_visit(id).map_err(|e| e.to_string())?;
            recorded.push(id);
        }
        let before = g.clone();
        let merges = g.try_merge(&ctx);
        let mut twin = before.clone();
        if twin.try_merge(&ctx) != merges || twin != g {
            return Err("merge is not deterministic".into());
        }
        let vocab = Vocabulary::new(["a", "b", "c", "d"]);
        if twin.serialize_text(None, "a", &vocab, TextMask::default())
            != g.serialize_text(None, "a", &vocab, TextMask::default())
        {
            return Err("text is not deterministic".into());
        }
        for &(kept, absorbed) in &merges {
            if kept >= absorbed {
                return Err(format!("kept {kept} is not older than absorbed {absorbed}"));
            }
            redirect.insert(absorbed, kept);
        }
    }

    let nodes = g.nodes();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if mergeable(
                a.position,
                b.position,
                &band,
                cfg.d_merge,
                cfg.los_half_width,
            ) {
                return Err(format!("nodes {} and {} still mergeable", a.id, b.id));
            }
        }
    }
    let live: std::collections::BTreeSet<NodeId> = nodes.iter().map(|n| n.id).collect();
    let resolve = |mut id: NodeId| {
        while let Some(&k) = redirect.get(&id) {
            id = k;
        }
        id
    };
    let want: Vec<NodeId> = recorded.iter().map(|&id| resolve(id)).collect();
    if g.history() != want.as_slice() {
        return Err(format!("history {:?} != {:?}", g.history(), want));
    }
    if let Some(h) = g.history().iter().find(|h| !live.contains(h)) {
        return Err(format!("history entry {h} is dead"));
    }

    g.refresh_attributes(&ctx);
    for n in g.nodes() {
        let near = |p: &Vec3| {
            (p.x - n.position[0]).powi(2) + (p.y - n.position[1]).powi(2) < cfg.r_topo.powi(2)
        };
        let objs: std::collections::BTreeSet<u16> = ctx
            .objects
            .iter()
            .filter(|(_, c)| c.iter().any(near))
            .map(|(&c, _)| c)
            .collect();
        let f = ctx.frontiers.iter().filter(|p| near(p)).count();
        if objs != n.objects || f != n.frontier_count {
            return Err(format!("attributes of node {} disagree", n.id));
        }
    }
    let fresh = g.create_node(Vec2::zeros(), &ctx, "room", 0);
    if fresh <= max_id {
        return Err(format!("fresh id {fresh} not above {max_id}"));
    }
    Ok(())
}

fn arr3(p: &Vec3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn arrs(c: &PointCloud) -> Vec<[f64; 3]> {
    c.iter().map(arr3).collect()
}

fn shifted(c: &PointCloud, t: Vec3) -> PointCloud {
    PointCloud::from_points(c.iter().map(|p| p + t).collect())
}

/// Random field checked against the double-loop reference: component
/// values, ranges, monotonicity, translation and scale invariance, mask
/// soundness and determinism.
pub fn affordance_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = rng.gen_range(1.0..8.0);
    let cloud = |rng: &mut ChaCha8Rng, lo: usize| {
        let n = rng.gen_range(lo..40);
        random_cloud(rng, n, lim, (-0.2, 1.0))
    };
    let candidates = cloud(&mut rng, 1);
    let inputs = PhaseInputs {
        direction: cloud(&mut rng, 0),
        node: cloud(&mut rng, 0),
        history: cloud(&mut rng, 0),
        semantic: cloud(&mut rng, 1),
        frontiers: cloud(&mut rng, 0),
        obstacles: cloud(&mut rng, 0),
    };
    let cfg = AffordanceConfig {
        epsilon: 10f64.powf(rng.gen_range(-9.0..-3.0)),
        d_safe: rng.gen_range(0.0..1.0),
        use_history: rng.gen_bool(0.7),
        ..AffordanceConfig::default()
    };
    let phase = if rng.gen_bool(0.5) {
        Phase::Exploration
    } else {
        Phase::TargetAcquisition
    };
    let cand = arrs(&candidates);
    let eps = cfg.epsilon;

    for src in [&inputs.direction, &inputs.semantic, &inputs.frontiers] {
        if src.is_empty() {
            continue;
        }
        let got = normalized_affordance(&candidates, src, eps).map_err(|e| e.to_string())?;
        let d = min_distances(&cand, &arrs(src));
        let want = normalized(&d, eps);
        for i in 0..cand.len() {
            if (got[i] - want[i]).abs() > 1e-12 {
                return Err(format!("N mismatch {} vs {}", got[i], want[i]));
            }
            if !(0.0..=1.0).contains(&got[i]) {
                return Err(format!("N out of range: {}", got[i]));
            }
            for j in 0..cand.len() {
                if d[i] < d[j] && got[i] < got[j] {
                    return Err("N is not monotone".into());
                }
            }
        }
    }

    let mut want = vec![0.0; cand.len()];
    let mut add = |src: &PointCloud, invert: bool| {
        if src.is_empty() {
            return;
        }
        let n = normalized(&min_distances(&cand, &arrs(src)), eps);
        for (w, v) in want.iter_mut().zip(n) {
            *w += if invert { 1.0 - v } else { v };
        }
    };
    add(&inputs.direction, false);
    match phase {
        Phase::Exploration => {
            add(&inputs.node, false);
            add(&inputs.frontiers, false);
            if cfg.use_history {
                add(&inputs.history, true);
            }
        }
        Phase::TargetAcquisition => add(&inputs.semantic, false),
    }
    let field = compose_field(&candidates, phase, &inputs, &cfg).map_err(|e| e.to_string())?;
    let cap = if phase == Phase::Exploration {
        4.0
    } else {
        2.0
    };
    for (g, w) in field.scores.iter().zip(&want) {
        if (g - w).abs() > 1e-12 {
            return Err(format!("composite {g} vs {w}"));
        }
        if *g < 0.0 || *g > cap + 1e-12 {
            return Err(format!("composite {g} outside [0, {cap}]"));
        }
    }

    let masked = safety_mask(field.clone(), &inputs.obstacles, &cfg);
    let obs = arrs(&inputs.obstacles);
    for (i, c) in cand.iter().enumerate() {
        let clear = obs
            .iter()
            .map(|&o| dist3(*c, o))
            .fold(f64::INFINITY, f64::min);
        if masked.masked[i] {
            if masked.scores[i] != 0.0 || clear >= cfg.d_safe {
                return Err(format!("candidate {i} wrongly masked"));
            }
        } else if clear < cfg.d_safe || masked.scores[i] != field.scores[i] {
            return Err(format!("candidate {i} wrongly kept"));
        }
    }

    let agent = Vec2::new(rng.gen_range(-lim..lim), rng.gen_range(-lim..lim));
    let pick = select_waypoint(&masked, agent).ok();
    if let Some(w) = &pick {
        let planar = |i: usize| (Vec2::new(cand[i][0], cand[i][1]) - agent).norm();
        for i in 0..cand.len() {
            if masked.masked[i] {
                continue;
            }
            let s = masked.scores[i];
            let better = s > w.score || (s == w.score && planar(i) < planar(w.index));
            let earlier = s == w.score && planar(i) == planar(w.index) && i < w.index;
            if better || earlier {
                return Err(format!("argmax picked {} over {i}", w.index));
            }
        }
    }
    let again = safety_mask(
        compose_field(&candidates, phase, &inputs, &cfg).unwrap(),
        &inputs.obstacles,
        &cfg,
    );
    if again != masked || select_waypoint(&again, agent).ok() != pick {
        return Err("field is not deterministic".into());
    }

    let scale = rng.gen_range(0.1..10.0);
    let mut scaled = masked.clone();
    for s in &mut scaled.scores {
        *s *= scale;
    }
    if select_waypoint(&scaled, agent).ok().map(|w| w.index) != pick.as_ref().map(|w| w.index) {
        return Err("argmax changed under scaling".into());
    }

    let t = Vec3::new(
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-5.0..5.0),
    );
    let moved_inputs = PhaseInputs {
        direction: shifted(&inputs.direction, t),
        node: shifted(&inputs.node, t),
        history: shifted(&inputs.history, t),
        semantic: shifted(&inputs.semantic, t),
        frontiers: shifted(&inputs.frontiers, t),
        obstacles: shifted(&inputs.obstacles, t),
    };
    let moved_cand = shifted(&candidates, t);
    let moved =
        compose_field(&moved_cand, phase, &moved_inputs, &cfg).map_err(|e| e.to_string())?;
    for (a, b) in moved.scores.iter().zip(&field.scores) {
        if (a - b).abs() > 1e-9 {
            return Err(format!("translation changed a score: {a} vs {b}"));
        }
    }
    let moved_pick = select_waypoint(&moved, agent + Vec2::new(t.x, t.y)).ok();
    let base_pick = select_waypoint(&field, agent).ok();
    if let (Some(a), Some(b)) = (&moved_pick, &base_pick) {
        if (a.point - b.point - t).norm() > 1e-9 {
            return Err("waypoint did not translate with the scene".into());
        }
    }
    Ok(())
}
