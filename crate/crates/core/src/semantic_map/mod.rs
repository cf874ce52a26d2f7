//! Incremental semantic point-cloud map.
//!
//! Posed, labelled depth frames are fused into a scene cloud and per-class
//! object clouds. Navigable, obstacle and frontier clouds plus the occupancy
//! grid are derived from those after every panorama.

mod grid;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{
    build_occupancy_grid, detect_frontiers, frontiers_to_world, OccupancyGrid, FREE, OBSTACLE,
    UNKNOWN,
};

use crate::cloud::{voxel_downsample, voxel_key, PointCloud, Rgb};
use crate::geometry::{
    backproject_pixel, camera_to_world, CameraIntrinsics, GeometryError, Pose, Vec2, Vec3,
};
use crate::labels::{is_object_class, ClassId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("frame arrays disagree: {0}")]
    FrameShape(String),
    #[error("no valid depth pixels to estimate the floor from")]
    NoValidPoints,
    #[error("map has no navigable or obstacle points")]
    EmptyMap,
    #[error("floor height not estimated yet")]
    NoFloor,
    #[error("cell ({i}, {j}) outside grid")]
    CellOutOfBounds { i: usize, j: usize },
    #[error("invalid map config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    /// Voxel size for all downsampling.
    pub r_pcd: f64,
    /// Floor tolerance.
    pub delta: f64,
    /// Spacing of bridging points between the agent and navigable points.
    pub step: f64,
    /// Occupancy grid resolution.
    pub r_g: f64,
    /// Classes counted as navigable regardless of height (stairs, ramps).
    pub nav_classes: BTreeSet<ClassId>,
    /// Height above the floor bounding the obstacle band used for line of
    /// sight checks.
    pub z_ceiling_offset: f64,
    pub max_depth: f64,
    /// Height of the camera above the floor, used to sanity-bound the floor
    /// estimate.
    pub camera_height: f64,
    /// Keep bridging points from earlier stand positions when the navigable
    /// cloud is recomputed.
    pub retain_bridges: bool,
    /// Which navigable points bridging lines are drawn towards.
    pub bridge_scope: BridgeScope,
}

/// Targets of the bridging interpolation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeScope {
    /// Every navigable point in the map.
    #[default]
    Map,
    /// Only navigable points from frames integrated since the last refresh.
    /// These were seen from above the stand position, so the bridges cannot
    /// cross full-height walls.
    Observation,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            r_pcd: 0.05,
            delta: 0.2,
            step: 0.25,
            r_g: 0.1,
            nav_classes: BTreeSet::new(),
            z_ceiling_offset: 1.5,
            max_depth: 10.0,
            camera_height: 0.88,
            retain_bridges: true,
            bridge_scope: BridgeScope::Map,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        let lengths = [
            ("r_pcd", self.r_pcd),
            ("delta", self.delta),
            ("step", self.step),
            ("r_g", self.r_g),
            ("z_ceiling_offset", self.z_ceiling_offset),
            ("max_depth", self.max_depth),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MapError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.step < self.r_pcd {
            return Err(MapError::Config(format!(
                "step ({}) must be at least r_pcd ({})",
                self.step, self.r_pcd
            )));
        }
        Ok(())
    }
}

/// One depth + color + label image with its camera pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    /// Row-major `height × width`, meters. Non-positive or NaN is invalid.
    pub depth: Vec<f64>,
    pub color: Vec<Rgb>,
    pub labels: Vec<ClassId>,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub heading_index: usize,
}

impl LabeledFrame {
    pub fn validate(&self) -> Result<(), MapError> {
        let n = self.intrinsics.width * self.intrinsics.height;
        if self.depth.len() != n || self.color.len() != n || self.labels.len() != n {
            return Err(MapError::FrameShape(format!(
                "expected {n} pixels, got depth={} color={} labels={}",
                self.depth.len(),
                self.color.len(),
                self.labels.len()
            )));
        }
        self.intrinsics.validate()?;
        self.pose.validate()?;
        Ok(())
    }

    /// World-frame points of every valid pixel, with color and label.
    pub fn world_points(&self, max_depth: f64) -> (Vec<(Vec3, Rgb, ClassId)>, usize) {
        let w = self.intrinsics.width;
        let mut out = Vec::with_capacity(self.depth.len());
        let mut invalid = 0;
        for (idx, &d) in self.depth.iter().enumerate() {
            let (u, v) = ((idx % w) as f64, (idx / w) as f64);
            match backproject_pixel(u, v, d, &self.intrinsics, max_depth) {
                Ok(xc) => out.push((
                    camera_to_world(&xc, &self.pose),
                    self.color[idx],
                    self.labels[idx],
                )),
                Err(_) => invalid += 1,
            }
        }
        (out, invalid)
    }
}

/// A voxel-downsampled cloud kept as one centroid per voxel, so that
/// `VoxelDownsample(M ∪ new)` only touches voxels hit by `new`.
#[derive(Debug, Clone, Default)]
struct VoxelStore {
    voxels: HashMap<(i64, i64, i64), (Vec3, Rgb)>,
}

impl VoxelStore {
    fn insert_batch(&mut self, points: &[(Vec3, Rgb)], r: f64) {
        let mut groups: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, (p, _)) in points.iter().enumerate() {
            groups.entry(voxel_key(p, r)).or_default().push(i);
        }
        for (key, idx) in groups {
            let (mut sum, mut csum, mut n) = match self.voxels.get(&key) {
                Some((p, c)) => (*p, [c[0] as u64, c[1] as u64, c[2] as u64], 1usize),
                None => (Vec3::zeros(), [0u64; 3], 0usize),
            };
            for i in idx {
                let (p, c) = points[i];
                sum += p;
                for k in 0..3 {
                    csum[k] += c[k] as u64;
                }
                n += 1;
            }
            let nf = n as f64;
            let avg = |s: u64| ((s as f64 / nf).round()).min(255.0) as u8;
            self.voxels
                .insert(key, (sum / nf, [avg(csum[0]), avg(csum[1]), avg(csum[2])]));
        }
    }

    fn len(&self) -> usize {
        self.voxels.len()
    }

    fn to_cloud(&self) -> PointCloud {
        let mut keys: Vec<_> = self.voxels.keys().copied().collect();
        keys.sort_unstable();
        let mut points = Vec::with_capacity(keys.len());
        let mut colors = Vec::with_capacity(keys.len());
        for k in keys {
            let (p, c) = self.voxels[&k];
            points.push(p);
            colors.push(c);
        }
        PointCloud::with_colors(points, colors)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameStats {
    pub valid: usize,
    pub invalid: usize,
}

/// The five clouds plus the occupancy grid.
#[derive(Debug, Clone)]
pub struct SemanticMap {
    config: MapConfig,
    scene: VoxelStore,
    objects: BTreeMap<ClassId, VoxelStore>,
    bridges: VoxelStore,
    /// Scene and navigable-class points since the last refresh.
    recent: VoxelStore,
    recent_nav: VoxelStore,
    pub navigable: PointCloud,
    pub obstacles: PointCloud,
    pub frontiers: PointCloud,
    pub z_floor: Option<f64>,
    pub grid: Option<OccupancyGrid>,
    frames_integrated: usize,
}

impl SemanticMap {
    pub fn new(config: MapConfig) -> Result<Self, MapError> {
        config.validate()?;
        Ok(Self {
            config,
            scene: VoxelStore::default(),
            objects: BTreeMap::new(),
            bridges: VoxelStore::default(),
            recent: VoxelStore::default(),
            recent_nav: VoxelStore::default(),
            navigable: PointCloud::new(),
            obstacles: PointCloud::new(),
            frontiers: PointCloud::new(),
            z_floor: None,
            grid: None,
            frames_integrated: 0,
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn frames_integrated(&self) -> usize {
        self.frames_integrated
    }

    pub fn scene(&self) -> PointCloud {
        self.scene.to_cloud()
    }

    pub fn scene_len(&self) -> usize {
        self.scene.len()
    }

    pub fn object_cloud(&self, class: ClassId) -> PointCloud {
        self.objects
            .get(&class)
            .map(VoxelStore::to_cloud)
            .unwrap_or_default()
    }

    /// All object clouds, keyed by class, in class order.
    pub fn objects(&self) -> BTreeMap<ClassId, PointCloud> {
        self.objects
            .iter()
            .map(|(&c, s)| (c, s.to_cloud()))
            .collect()
    }

    pub fn has_object(&self, class: ClassId) -> bool {
        self.objects.get(&class).is_some_and(|s| s.len() > 0)
    }

    pub fn floor(&self) -> Result<f64, MapError> {
        self.z_floor.ok_or(MapError::NoFloor)
    }

    /// Adds one frame to the scene and object clouds. Invalid depth pixels
    /// are skipped.
    pub fn integrate_frame(&mut self, frame: &LabeledFrame) -> Result<FrameStats, MapError> {
        frame.validate()?;
        let (points, invalid) = frame.world_points(self.config.max_depth);
        if invalid > 0 {
            log::debug!(
                "frame {}: skipped {invalid} invalid depth pixels",
                frame.heading_index
            );
        }
        let r = self.config.r_pcd;
        let scene: Vec<(Vec3, Rgb)> = points.iter().map(|&(p, c, _)| (p, c)).collect();
        self.scene.insert_batch(&scene, r);
        self.recent.insert_batch(&scene, r);
        let nav: Vec<(Vec3, Rgb)> = points
            .iter()
            .filter(|(_, _, l)| self.config.nav_classes.contains(l))
            .map(|&(p, c, _)| (p, c))
            .collect();
        self.recent_nav.insert_batch(&nav, r);

        let mut per_class: BTreeMap<ClassId, Vec<(Vec3, Rgb)>> = BTreeMap::new();
        for &(p, c, label) in &points {
            if is_object_class(label) {
                per_class.entry(label).or_default().push((p, c));
            }
        }
        for (class, pts) in per_class {
            self.objects.entry(class).or_default().insert_batch(&pts, r);
        }
        self.frames_integrated += 1;
        Ok(FrameStats {
            valid: points.len(),
            invalid,
        })
    }

    /// Band-filtered scene plus navigable-class objects, and the bridging
    /// points from `stand` towards each of them.
    fn navigable_parts(&self, stand: Vec2) -> Result<(PointCloud, PointCloud), MapError> {
        let zf = self.floor()?;
        let delta = self.config.delta;
        let mut base = self
            .scene()
            .filter(|p| p.z >= zf - delta && p.z <= zf + delta);
        for c in &self.config.nav_classes {
            if let Some(store) = self.objects.get(c) {
                base.extend(&store.to_cloud());
            }
        }
        let recent;
        let targets = match self.config.bridge_scope {
            BridgeScope::Map => &base,
            BridgeScope::Observation => {
                let mut t = self
                    .recent
                    .to_cloud()
                    .filter(|p| p.z >= zf - delta && p.z <= zf + delta);
                t.extend(&self.recent_nav.to_cloud());
                recent = t;
                &recent
            }
        };
        let bridges = interpolate_from_stand(
            targets,
            Vec3::new(stand.x, stand.y, zf),
            self.config.step,
            zf,
            delta,
        );
        Ok((base, bridges))
    }

    /// Navigable cloud as seen from the stand position `stand = (x_t, y_t)`.
    pub fn compute_navigable(&self, stand: Vec2) -> Result<PointCloud, MapError> {
        let (mut base, bridges) = self.navigable_parts(stand)?;
        base.extend(&bridges);
        Ok(voxel_downsample(&base, self.config.r_pcd))
    }

    /// Scene points strictly above the floor band.
    pub fn compute_obstacles(&self) -> Result<PointCloud, MapError> {
        let zf = self.floor()?;
        let top = zf + self.config.delta;
        Ok(self.scene().filter(|p| p.z > top))
    }

    /// Recomputes navigable, obstacle, grid and frontier layers for an agent
    /// standing at `stand`.
    pub fn refresh(&mut self, stand: Vec2) -> Result<(), MapError> {
        let zf = self.floor()?;
        let (mut base, bridges) = self.navigable_parts(stand)?;
        if self.config.retain_bridges {
            let pts: Vec<(Vec3, Rgb)> = bridges.iter().map(|&p| (p, [255; 3])).collect();
            self.bridges.insert_batch(&pts, self.config.r_pcd);
            base.extend(&self.bridges.to_cloud());
        } else {
            base.extend(&bridges);
        }
        self.navigable = voxel_downsample(&base, self.config.r_pcd);
        self.obstacles = self.compute_obstacles()?;
        let grid = build_occupancy_grid(&self.navigable, &self.obstacles, self.config.r_g)?;
        let cells = detect_frontiers(&grid);
        self.frontiers = frontiers_to_world(&cells, &grid, zf)?;
        self.grid = Some(grid);
        self.recent = VoxelStore::default();
        self.recent_nav = VoxelStore::default();
        Ok(())
    }
}

/// Points `p_k = stand + k·step·(x − stand)/‖x − stand‖` for
/// `k = 1..=⌊‖x − stand‖/step⌋`, for every `x` farther than `step`, keeping
/// only those with `|z_k − z_floor| < delta`.
pub fn interpolate_from_stand(
    targets: &PointCloud,
    stand: Vec3,
    step: f64,
    z_floor: f64,
    delta: f64,
) -> PointCloud {
    let mut out = Vec::new();
    for x in targets.iter() {
        let diff = x - stand;
        let dist = diff.norm();
        if dist <= step {
            continue;
        }
        let n = (dist / step).floor() as usize;
        for k in 1..=n {
            let p = stand + diff * (k as f64 * step / dist);
            if (p.z - z_floor).abs() < delta {
                out.push(p);
            }
        }
    }
    PointCloud::from_points(out)
}

/// Floor height from the first panorama: the 5th percentile of world z over
/// valid points lying within 0.5 m of the height implied by the camera
/// mount. Falls back to the clamped percentile of all points when none lie
/// in that window.
pub fn estimate_floor(
    panorama: &[LabeledFrame],
    camera_pose: &Pose,
    config: &MapConfig,
) -> Result<f64, MapError> {
    let mut zs = Vec::new();
    for f in panorama {
        f.validate()?;
        let (pts, _) = f.world_points(config.max_depth);
        zs.extend(pts.into_iter().map(|(p, _, _)| p.z));
    }
    if zs.is_empty() {
        return Err(MapError::NoValidPoints);
    }
    let expected = camera_pose.position[2] - config.camera_height;
    const WINDOW: f64 = 0.5;
    let mut near: Vec<f64> = zs
        .iter()
        .copied()
        .filter(|z| (z - expected).abs() <= WINDOW)
        .collect();
    let pool = if near.is_empty() { &mut zs } else { &mut near };
    pool.sort_by(f64::total_cmp);
    let rank = ((0.05 * pool.len() as f64).ceil() as usize).max(1) - 1;
    Ok(pool[rank].clamp(expected - WINDOW, expected + WINDOW))
}
