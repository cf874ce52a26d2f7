mod common;

use std::collections::BTreeSet;

use objnav_core::cloud::{voxel_downsample, PointCloud};
use objnav_core::geometry::{CameraIntrinsics, Pose, Vec2, Vec3};
use objnav_core::semantic_map::{
    build_occupancy_grid, detect_frontiers, frontiers_to_world, interpolate_from_stand, MapConfig,
    OccupancyGrid, SemanticMap, FREE, OBSTACLE, UNKNOWN,
};
use proptest::prelude::*;

fn arr(p: &Vec3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn cloud_of(pts: &[[f64; 3]]) -> PointCloud {
    PointCloud::from_points(pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
}

fn points(n: usize, lim: f64) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(
        (-lim..lim, -lim..lim, -0.5..2.5f64).prop_map(|(x, y, z)| [x, y, z]),
        0..n,
    )
}

fn grid_values(nx: usize, ny: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(
        prop_oneof![Just(FREE), Just(OBSTACLE), Just(UNKNOWN)],
        nx * ny,
    )
}

fn map_with(points: &[[f64; 3]], z_floor: f64, cfg: MapConfig) -> SemanticMap {
    // Each point becomes one pixel of a straight-down camera at its own
    // (x, y), 3 m above it.
    let mut map = SemanticMap::new(cfg).unwrap();
    let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).unwrap();
    for p in points {
        let down = nalgebra::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI);
        let pose = Pose::new(Vec3::new(p[0], p[1], p[2] + 3.0), down);
        map.integrate_frame(&common::frame(vec![3.0], vec![0], k, pose))
            .unwrap();
    }
    map.z_floor = Some(z_floor);
    map
}

proptest! {
    #[test]
    fn downsample_matches_bucketing(pts in points(400, 1.0), r in 0.02..0.5f64) {
        let got: Vec<[f64; 3]> = voxel_downsample(&cloud_of(&pts), r).iter().map(arr).collect();
        prop_assert_eq!(got, common::bucket_centroids(&pts, r));
    }

    #[test]
    fn downsample_idempotent_and_sparse(pts in points(400, 1.0), r in 0.02..0.5f64) {
        let once = voxel_downsample(&cloud_of(&pts), r);
        let twice = voxel_downsample(&once, r);
        prop_assert_eq!(once.len(), twice.len());
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a - b).norm() < r * 3f64.sqrt() / 2.0);
        }
        let keys: BTreeSet<_> = once.iter().map(|p| common::voxel_key(arr(p), r)).collect();
        prop_assert_eq!(keys.len(), once.len());
    }

    #[test]
    fn grid_matches_projection(nav in points(200, 3.0), obs in points(200, 3.0), res in 0.05..0.5f64) {
        prop_assume!(!nav.is_empty() || !obs.is_empty());
        let g = build_occupancy_grid(&cloud_of(&nav), &cloud_of(&obs), res).unwrap();
        let all: Vec<&[f64; 3]> = nav.iter().chain(&obs).collect();
        let x_min = all.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - res;
        let y_min = all.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - res;
        let x_max = all.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + res;
        let y_max = all.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + res;
        let nx = ((x_max - x_min) / res).ceil() as usize;
        let ny = ((y_max - y_min) / res).ceil() as usize;
        prop_assert_eq!((g.nx, g.ny), (nx, ny));
        let want = common::rasterize(&nav, &obs, x_min, y_min, res, nx, ny);
        for i in 0..nx {
            for j in 0..ny {
                prop_assert_eq!(g.get(i, j), want[i][j]);
            }
        }
        let again = build_occupancy_grid(&cloud_of(&nav), &cloud_of(&obs), res).unwrap();
        prop_assert_eq!(g, again);
    }

    #[test]
    fn frontiers_match_rule(nx in 1usize..12, ny in 1usize..12, seed in any::<u64>()) {
        let mut g = OccupancyGrid::new(0.0, 0.0, 0.1, nx, ny);
        let mut s = seed;
        let mut cells = vec![vec![0i8; ny]; nx];
        for (i, row) in cells.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *c = [FREE, OBSTACLE, UNKNOWN][(s >> 33) as usize % 3];
                g.set(i, j, *c);
            }
        }
        let got = detect_frontiers(&g);
        prop_assert_eq!(&got, &common::frontier_cells(&cells));
        let lifted = frontiers_to_world(&got, &g, -0.3).unwrap();
        for (p, &(i, j)) in lifted.iter().zip(&got) {
            prop_assert_eq!(p.z, -0.3);
            prop_assert_eq!((p.x, p.y), (i as f64 * 0.1, j as f64 * 0.1));
        }
    }

    #[test]
    fn frontiers_on_random_grid_values(v in grid_values(6, 5)) {
        let mut g = OccupancyGrid::new(1.0, 2.0, 0.2, 6, 5);
        let mut cells = vec![vec![0i8; 5]; 6];
        for i in 0..6 {
            for j in 0..5 {
                g.set(i, j, v[i * 5 + j]);
                cells[i][j] = v[i * 5 + j];
            }
        }
        prop_assert_eq!(detect_frontiers(&g), common::frontier_cells(&cells));
    }

    #[test]
    fn band_partition_and_filters(pts in points(150, 2.0), zf in -0.2..0.2f64) {
        let cfg = MapConfig { step: 1e6, ..MapConfig::default() };
        let delta = cfg.delta;
        let map = map_with(&pts, zf, cfg);
        let scene: Vec<[f64; 3]> = map.scene().iter().map(arr).collect();
        let obstacles: Vec<[f64; 3]> = map.compute_obstacles().unwrap().iter().map(arr).collect();
        let want_obs: Vec<[f64; 3]> = scene.iter().copied().filter(|p| p[2] > zf + delta).collect();
        prop_assert_eq!(&obstacles, &want_obs);
        let nav: Vec<[f64; 3]> = map.compute_navigable(Vec2::zeros()).unwrap().iter().map(arr).collect();
        let want_nav: Vec<[f64; 3]> = scene.iter().copied().filter(|p| p[2] >= zf - delta && p[2] <= zf + delta).collect();
        prop_assert_eq!(&nav, &want_nav);
        for p in &scene {
            let classes = [
                p[2] >= zf - delta && p[2] <= zf + delta,
                p[2] > zf + delta,
                p[2] < zf - delta,
            ];
            prop_assert_eq!(classes.iter().filter(|&&c| c).count(), 1);
        }
    }

    #[test]
    fn interpolants_collinear_and_in_band(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -0.3..0.3f64, step in 0.05..1.0f64) {
        let stand = Vec3::new(0.3, -0.2, 0.0);
        let target = Vec3::new(x, y, z);
        let out = interpolate_from_stand(&PointCloud::from_points(vec![target]), stand, step, 0.0, 0.2);
        let dist = (target - stand).norm();
        let n = if dist > step { (dist / step).floor() as usize } else { 0 };
        let expect: Vec<Vec3> = (1..=n)
            .map(|k| stand + (target - stand) * (k as f64 * step / dist))
            .filter(|p| p.z.abs() < 0.2)
            .collect();
        prop_assert_eq!(out.len(), expect.len());
        for (a, b) in out.iter().zip(&expect) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn integrate_single_pixel_and_overlap() {
    let k = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
    let pose = Pose::camera_at(1.0, 2.0, 0.88, 0.3);
    let mut depth = vec![f64::NAN; 16];
    depth[5] = 2.5;
    let mut map = SemanticMap::new(MapConfig::default()).unwrap();
    map.integrate_frame(&common::frame(depth, vec![0; 16], k, pose))
        .unwrap();
    let xc = common::backproject(1.0, 1.0, 2.5, 10.0, 10.0, 2.0, 2.0);
    let want = common::to_world(pose.orientation, pose.position, xc);
    let scene = map.scene();
    assert_eq!(scene.len(), 1);
    assert!(common::dist3(arr(&scene.points[0]), want) < 1e-12);

    let mut empty = SemanticMap::new(MapConfig::default()).unwrap();
    let stats = empty
        .integrate_frame(&common::frame(vec![-1.0; 16], vec![0; 16], k, pose))
        .unwrap();
    assert_eq!((stats.valid, stats.invalid, empty.scene_len()), (0, 16, 0));

    let wall = |yaw: f64| {
        common::frame(
            vec![2.0; 16],
            vec![1; 16],
            k,
            Pose::camera_at(0.0, 0.0, 0.88, yaw),
        )
    };
    let mut m = SemanticMap::new(MapConfig::default()).unwrap();
    m.integrate_frame(&wall(0.0)).unwrap();
    let first = m.scene_len();
    m.integrate_frame(&wall(0.01)).unwrap();
    assert!(m.scene_len() < 2 * first);
}

#[test]
fn scene_matches_bucketed_frame_points() {
    let k = CameraIntrinsics::new(40.0, 40.0, 16.0, 12.0, 32, 24).unwrap();
    let pose = Pose::camera_at(0.5, -1.0, 0.88, 1.1);
    let depth: Vec<f64> = (0..32 * 24).map(|i| 0.5 + (i % 37) as f64 * 0.13).collect();
    let f = common::frame(depth, vec![0; 32 * 24], k, pose);
    let mut map = SemanticMap::new(MapConfig::default()).unwrap();
    map.integrate_frame(&f).unwrap();
    let (pts, _) = f.world_points(10.0);
    let raw: Vec<[f64; 3]> = pts.iter().map(|(p, _, _)| arr(p)).collect();
    let got: Vec<[f64; 3]> = map.scene().iter().map(arr).collect();
    assert_eq!(got, common::bucket_centroids(&raw, 0.05));
}

#[test]
fn frontier_examples() {
    let mut g = OccupancyGrid::new(0.0, 0.0, 1.0, 3, 3);
    for i in 0..3 {
        g.set(i, 2, FREE);
        g.set(i, 0, OBSTACLE);
    }
    assert_eq!(detect_frontiers(&g), vec![(0, 2), (1, 2), (2, 2)]);
    let mut free = OccupancyGrid::new(0.0, 0.0, 1.0, 3, 3);
    for i in 0..3 {
        for j in 0..3 {
            free.set(i, j, FREE);
        }
    }
    assert!(detect_frontiers(&free).is_empty());
    assert!(detect_frontiers(&OccupancyGrid::new(0.0, 0.0, 1.0, 3, 3)).is_empty());
}
