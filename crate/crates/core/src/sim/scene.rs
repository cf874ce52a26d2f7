//! Declarative box-world scenes.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::Vec2;
use crate::labels::{is_valid_class_name, Vocabulary};

/// Axis-aligned box, serialized as `[x0, y0, z0, x1, y1, z1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl From<[f64; 6]> for Aabb {
    fn from(v: [f64; 6]) -> Self {
        Self {
            min: [v[0].min(v[3]), v[1].min(v[4]), v[2].min(v[5])],
            max: [v[0].max(v[3]), v[1].max(v[4]), v[2].max(v[5])],
        }
    }
}

impl From<Aabb> for [f64; 6] {
    fn from(b: Aabb) -> Self {
        [b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2]]
    }
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn has_volume(&self) -> bool {
        (0..3).all(|k| self.max[k] > self.min[k])
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }

    /// Planar distance from `p` to the box footprint (0 inside).
    pub fn footprint_distance(&self, p: Vec2) -> f64 {
        let dx = (self.min[0] - p.x).max(0.0).max(p.x - self.max[0]);
        let dy = (self.min[1] - p.y).max(0.0).max(p.y - self.max[1]);
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: Aabb,
}

/// Start pose and target for an episode stored alongside a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDef {
    /// `[x, y, yaw]`.
    pub start: [f64; 3],
    pub target: String,
}

fn default_wall_height() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// `[x0, y0, x1, y1]`; the boundary acts as a wall.
    pub bounds: [f64; 4],
    #[serde(default)]
    pub walls: Vec<Aabb>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(
        default = "default_wall_height",
        skip_serializing_if = "is_default_height"
    )]
    pub wall_height: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub episodes: Vec<EpisodeDef>,
}

fn is_default_height(h: &f64) -> bool {
    *h == default_wall_height()
}

impl Scene {
    pub fn new(bounds: [f64; 4]) -> Self {
        Self {
            bounds,
            walls: Vec::new(),
            objects: Vec::new(),
            wall_height: default_wall_height(),
            episodes: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scene =
            serde_json::from_str(text).map_err(|e| SimError::SceneParse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let [x0, y0, x1, y1] = self.bounds;
        if !(x1 > x0 && y1 > y0 && self.wall_height > 0.0) {
            return Err(SimError::InvalidScene(
                "bounds must have positive extent".into(),
            ));
        }
        let inside = |b: &Aabb| {
            b.min[0] >= x0 && b.min[1] >= y0 && b.max[0] <= x1 && b.max[1] <= y1 && b.min[2] >= 0.0
        };
        for (i, w) in self.walls.iter().enumerate() {
            if !w.has_volume() || !inside(w) {
                return Err(SimError::InvalidScene(format!(
                    "wall {i} empty or out of bounds"
                )));
            }
        }
        for o in &self.objects {
            if !is_valid_class_name(&o.class) {
                return Err(SimError::InvalidScene(format!(
                    "bad class name {:?}",
                    o.class
                )));
            }
            if !o.bbox.has_volume() || !inside(&o.bbox) {
                return Err(SimError::InvalidScene(format!(
                    "object {} empty or out of bounds",
                    o.class
                )));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.objects.iter().map(|o| o.class.clone()))
    }

    pub fn instances<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a Aabb> + 'a {
        self.objects
            .iter()
            .filter(move |o| o.class == class)
            .map(|o| &o.bbox)
    }

    /// Planar distance to the nearest instance of `class`.
    pub fn distance_to_class(&self, p: Vec2, class: &str) -> Option<f64> {
        self.instances(class)
            .map(|b| b.footprint_distance(p))
            .min_by(f64::total_cmp)
    }

    /// Boxes that stop the agent: walls and every object whose class is not
    /// walkable.
    pub fn blocking_boxes<'a>(
        &'a self,
        walkable: &'a [String],
    ) -> impl Iterator<Item = &'a Aabb> + 'a {
        self.walls.iter().chain(
            self.objects
                .iter()
                .filter(move |o| !walkable.contains(&o.class))
                .map(|o| &o.bbox),
        )
    }

    /// Planar clearance from `p` to blocking geometry and the boundary.
    pub fn clearance(&self, p: Vec2, walkable: &[String]) -> f64 {
        let [x0, y0, x1, y1] = self.bounds;
        let boundary = (p.x - x0).min(x1 - p.x).min(p.y - y0).min(y1 - p.y);
        self.blocking_boxes(walkable)
            .map(|b| b.footprint_distance(p))
            .fold(boundary, f64::min)
    }
}
