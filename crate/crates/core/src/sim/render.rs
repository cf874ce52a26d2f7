//! Raycast depth + label panoramas of a box world.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::scene::{Aabb, Scene};
use super::SimError;
use crate::cloud::Rgb;
use crate::geometry::{CameraIntrinsics, Pose, Vec3};
use crate::labels::{ClassId, Vocabulary, UNLABELED, WALL};
use crate::oracle::HeadingSummary;
use crate::semantic_map::LabeledFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in radians. `None` tiles the panorama
    /// exactly (`2π / num_headings`).
    pub hfov: Option<f64>,
    pub vfov: f64,
    pub camera_height: f64,
    pub max_depth: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 32,
            height: 192,
            hfov: None,
            vfov: 90f64.to_radians(),
            camera_height: 0.88,
            max_depth: 10.0,
        }
    }
}

impl RenderConfig {
    pub fn intrinsics(&self, num_headings: usize) -> Result<CameraIntrinsics, SimError> {
        let hfov = self.hfov.unwrap_or(TAU / num_headings as f64);
        if !(hfov > 0.0 && hfov < PI && self.vfov > 0.0 && self.vfov < PI) {
            return Err(SimError::InvalidConfig(format!(
                "fields of view must lie in (0, π), got {hfov:.3} × {:.3}; use at least 3 headings or set hfov",
                self.vfov
            )));
        }
        CameraIntrinsics::from_fov(self.width, self.height, hfov, self.vfov)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

/// Nearest hit of a ray against the scene: `(t, label)` where `t` scales
/// `dir`. The scene boundary is the inside of a box from the floor up to the
/// wall height; leaving through the top is a miss.
pub fn cast_ray(
    scene: &Scene,
    vocab: &Vocabulary,
    origin: Vec3,
    dir: Vec3,
) -> Option<(f64, ClassId)> {
    let mut best = boundary_exit(scene, origin, dir);
    let mut consider = |b: &Aabb, label: ClassId| {
        if let Some(t) = slab_entry(b, origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, label));
            }
        }
    };
    for w in &scene.walls {
        consider(w, WALL);
    }
    for o in &scene.objects {
        consider(&o.bbox, vocab.id(&o.class).unwrap_or(UNLABELED));
    }
    best
}

/// Entry parameter of the ray into `b` (slab method), if it hits in front of
/// the origin.
fn slab_entry(b: &Aabb, o: Vec3, d: Vec3) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < b.min[k] || o[k] > b.max[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut a, mut c) = ((b.min[k] - o[k]) * inv, (b.max[k] - o[k]) * inv);
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        t0 = t0.max(a);
        t1 = t1.min(c);
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

fn boundary_exit(scene: &Scene, o: Vec3, d: Vec3) -> Option<(f64, ClassId)> {
    let [x0, y0, x1, y1] = scene.bounds;
    let lo = [x0, y0, 0.0];
    let hi = [x1, y1, scene.wall_height];
    let mut best: Option<(f64, usize, bool)> = None;
    for k in 0..3 {
        if d[k] == 0.0 {
            continue;
        }
        let (plane, upper) = if d[k] > 0.0 {
            (hi[k], true)
        } else {
            (lo[k], false)
        };
        let t = (plane - o[k]) / d[k];
        if best.is_none_or(|(bt, _, _)| t < bt) {
            best = Some((t, k, upper));
        }
    }
    let (t, axis, upper) = best?;
    match (axis, upper) {
        (2, true) => None,
        (2, false) => Some((t, UNLABELED)),
        _ => Some((t, WALL)),
    }
}

fn label_color(label: ClassId) -> Rgb {
    match label {
        UNLABELED => [128, 128, 128],
        WALL => [200, 200, 190],
        c => {
            let h = (c as u32).wrapping_mul(2654435761);
            [(h >> 16) as u8, (h >> 8) as u8, h as u8]
        }
    }
}

/// Renders `num_headings` evenly spaced level views from `(x, y)`; view `k`
/// looks along yaw `2πk / num_headings`.
pub fn render_panorama(
    scene: &Scene,
    vocab: &Vocabulary,
    x: f64,
    y: f64,
    num_headings: usize,
    cfg: &RenderConfig,
) -> Result<Vec<LabeledFrame>, SimError> {
    let eye = [x, y, cfg.camera_height];
    let [x0, y0, x1, y1] = scene.bounds;
    let outside = !(x > x0 && x < x1 && y > y0 && y < y1);
    let inside_box = scene
        .walls
        .iter()
        .chain(scene.objects.iter().map(|o| &o.bbox))
        .any(|b| b.contains(eye));
    if outside || inside_box {
        return Err(SimError::PoseInsideGeometry { x, y });
    }
    let k = cfg.intrinsics(num_headings)?;
    let n = k.width * k.height;
    let mut frames = Vec::with_capacity(num_headings);
    for h in 0..num_headings {
        let yaw = TAU * h as f64 / num_headings as f64;
        let pose = Pose::camera_at(x, y, cfg.camera_height, yaw);
        let rot = pose.rotation().to_rotation_matrix();
        let origin = pose.translation();
        let mut depth = vec![0.0; n];
        let mut labels = vec![UNLABELED; n];
        let mut color = vec![[0u8; 3]; n];
        for v in 0..k.height {
            for u in 0..k.width {
                let dir = rot * k.ray(u as f64, v as f64);
                let idx = v * k.width + u;
                if let Some((t, label)) = cast_ray(scene, vocab, origin, dir) {
                    if t <= cfg.max_depth {
                        depth[idx] = t;
                        labels[idx] = label;
                        color[idx] = label_color(label);
                    }
                }
            }
        }
        frames.push(LabeledFrame {
            depth,
            color,
            labels,
            pose,
            intrinsics: k,
            heading_index: h,
        });
    }
    Ok(frames)
}

/// Per-heading visible object classes and mean horizon depth (misses count
/// as `max_depth`).
pub fn summarize_panorama(
    frames: &[LabeledFrame],
    vocab: &Vocabulary,
    max_depth: f64,
) -> Vec<HeadingSummary> {
    frames
        .iter()
        .map(|f| {
            let classes: BTreeSet<&str> = f.labels.iter().filter_map(|&l| vocab.name(l)).collect();
            let w = f.intrinsics.width;
            let row = (f.intrinsics.cy.round() as usize).min(f.intrinsics.height - 1);
            let horizon = &f.depth[row * w..(row + 1) * w];
            let free_depth = horizon
                .iter()
                .map(|&d| {
                    if d > 0.0 && d.is_finite() {
                        d
                    } else {
                        max_depth
                    }
                })
                .sum::<f64>()
                / w as f64;
            HeadingSummary {
                heading: f.heading_index,
                classes: classes.into_iter().map(str::to_string).collect(),
                free_depth,
            }
        })
        .collect()
}
