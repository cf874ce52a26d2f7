//! Point clouds, voxel downsampling and nearest-neighbour queries.

use std::collections::HashMap;
use std::io::{self, Write};

use kd_tree::KdTree;
use rstar::RTree;

use crate::geometry::Vec3;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Parallel to `points` when present.
    pub colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self {
            points,
            colors: None,
        }
    }

    pub fn with_colors(points: Vec<Vec3>, colors: Vec<Rgb>) -> Self {
        assert_eq!(points.len(), colors.len(), "colors must parallel points");
        Self {
            points,
            colors: Some(colors),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec3> {
        self.points.iter()
    }

    /// Appends `other`. If exactly one side carries colors the result keeps
    /// them and fills the gap with white.
    pub fn extend(&mut self, other: &PointCloud) {
        match (&mut self.colors, &other.colors) {
            (Some(mine), Some(theirs)) => mine.extend_from_slice(theirs),
            (Some(mine), None) => mine.extend(std::iter::repeat_n([255; 3], other.len())),
            (None, Some(theirs)) if !other.is_empty() => {
                let mut c = vec![[255; 3]; self.points.len()];
                c.extend_from_slice(theirs);
                self.colors = Some(c);
            }
            _ => {}
        }
        self.points.extend_from_slice(&other.points);
    }

    pub fn push(&mut self, p: Vec3, color: Option<Rgb>) {
        self.points.push(p);
        match (&mut self.colors, color) {
            (Some(c), col) => c.push(col.unwrap_or([255; 3])),
            (None, Some(col)) => {
                let mut c = vec![[255; 3]; self.points.len() - 1];
                c.push(col);
                self.colors = Some(c);
            }
            (None, None) => {}
        }
    }

    pub fn filter<F: Fn(&Vec3) -> bool>(&self, keep: F) -> PointCloud {
        let mut out = PointCloud {
            points: Vec::new(),
            colors: self.colors.as_ref().map(|_| Vec::new()),
        };
        for (i, p) in self.points.iter().enumerate() {
            if keep(p) {
                out.points.push(*p);
                if let (Some(dst), Some(src)) = (&mut out.colors, &self.colors) {
                    dst.push(src[i]);
                }
            }
        }
        out
    }

    /// Writes ASCII PLY with `x y z r g b` per line.
    pub fn write_ply<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.points.len())?;
        for axis in ["x", "y", "z"] {
            writeln!(w, "property float {axis}")?;
        }
        for ch in ["red", "green", "blue"] {
            writeln!(w, "property uchar {ch}")?;
        }
        writeln!(w, "end_header")?;
        for (i, p) in self.points.iter().enumerate() {
            let c = self.colors.as_ref().map(|c| c[i]).unwrap_or([255; 3]);
            writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

pub(crate) fn voxel_key(p: &Vec3, r: f64) -> (i64, i64, i64) {
    (
        (p.x / r).floor() as i64,
        (p.y / r).floor() as i64,
        (p.z / r).floor() as i64,
    )
}

struct Bucket {
    sum: Vec3,
    color: [u64; 3],
    count: usize,
}

/// Replaces all points inside each cubic voxel of side `r` by their centroid.
/// Output is ordered by voxel index so the result does not depend on hashing.
pub fn voxel_downsample(cloud: &PointCloud, r: f64) -> PointCloud {
    assert!(r > 0.0, "voxel size must be positive");
    let mut buckets: HashMap<(i64, i64, i64), Bucket> = HashMap::with_capacity(cloud.len() / 2);
    for (i, p) in cloud.points.iter().enumerate() {
        let b = buckets.entry(voxel_key(p, r)).or_insert(Bucket {
            sum: Vec3::zeros(),
            color: [0; 3],
            count: 0,
        });
        b.sum += p;
        b.count += 1;
        if let Some(colors) = &cloud.colors {
            for (acc, c) in b.color.iter_mut().zip(colors[i]) {
                *acc += c as u64;
            }
        }
    }
    let mut keys: Vec<_> = buckets.keys().copied().collect();
    keys.sort_unstable();
    let mut points = Vec::with_capacity(keys.len());
    let mut colors = cloud
        .colors
        .as_ref()
        .map(|_| Vec::with_capacity(keys.len()));
    for k in keys {
        let b = &buckets[&k];
        let n = b.count as f64;
        points.push(b.sum / n);
        if let Some(c) = &mut colors {
            let avg = |s: u64| ((s as f64 / n).round()).min(255.0) as u8;
            c.push([avg(b.color[0]), avg(b.color[1]), avg(b.color[2])]);
        }
    }
    PointCloud { points, colors }
}

/// Exact nearest-neighbour index over a 3D point set.
pub struct NearestIndex {
    tree: KdTree<[f64; 3]>,
}

impl NearestIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            tree: KdTree::build_by_ordered_float(coords),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn nearest(&self, q: &Vec3) -> Option<(Vec3, f64)> {
        let hit = self.tree.nearest(&[q.x, q.y, q.z])?;
        let p = Vec3::new(hit.item[0], hit.item[1], hit.item[2]);
        Some((p, (p - q).norm()))
    }

    pub fn nearest_distance(&self, q: &Vec3) -> Option<f64> {
        self.nearest(q).map(|(_, d)| d)
    }
}

/// 2D index over the x–y projection of a point set.
pub struct PlanarIndex {
    tree: RTree<[f64; 2]>,
}

impl PlanarIndex {
    pub fn new<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let pts = points.into_iter().map(|p| [p.x, p.y]).collect();
        Self {
            tree: RTree::bulk_load(pts),
        }
    }

    /// Points with planar distance strictly below `radius`.
    pub fn count_within(&self, x: f64, y: f64, radius: f64) -> usize {
        let r2 = radius * radius;
        self.tree
            .locate_within_distance([x, y], r2)
            .filter(|p| {
                let dx = p[0] - x;
                let dy = p[1] - y;
                dx * dx + dy * dy < r2
            })
            .count()
    }

    pub fn in_envelope(&self, lo: [f64; 2], hi: [f64; 2]) -> impl Iterator<Item = &[f64; 2]> {
        self.tree
            .locate_in_envelope(&rstar::AABB::from_corners(lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_voxel_centroid() {
        let c = PointCloud::from_points(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.04, 0.0, 0.0)]);
        let d = voxel_downsample(&c, 0.05);
        assert_eq!(d.len(), 1);
        assert!((d.points[0] - Vec3::new(0.02, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn distinct_voxels_kept() {
        let c = PointCloud::from_points(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0)]);
        assert_eq!(voxel_downsample(&c, 0.05).len(), 2);
    }

    #[test]
    fn empty_cloud() {
        assert!(voxel_downsample(&PointCloud::new(), 0.1).is_empty());
    }

    #[test]
    fn colors_averaged() {
        let c = PointCloud::with_colors(
            vec![Vec3::new(0.01, 0.0, 0.0), Vec3::new(0.02, 0.0, 0.0)],
            vec![[0, 10, 255], [10, 20, 255]],
        );
        let d = voxel_downsample(&c, 0.05);
        assert_eq!(d.colors.unwrap(), vec![[5, 15, 255]]);
    }

    #[test]
    fn ply_layout() {
        let c = PointCloud::from_points(vec![Vec3::new(1.0, 2.0, 3.0)]);
        let mut buf = Vec::new();
        c.write_ply(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("element vertex 1"));
        assert!(s.trim_end().ends_with("1 2 3 255 255 255"));
    }

    #[test]
    fn nearest_and_radius() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.9, 0.0, 5.0),
        ];
        let idx = NearestIndex::new(&pts);
        let (p, d) = idx.nearest(&Vec3::new(0.8, 0.0, 0.0)).unwrap();
        assert_eq!(p, pts[1]);
        assert!((d - 0.2).abs() < 1e-12);
        let planar = PlanarIndex::new(&pts);
        assert_eq!(planar.count_within(0.0, 0.0, 1.0), 1);
        assert_eq!(planar.count_within(0.0, 0.0, 2.0), 3);
        assert!(NearestIndex::new(&[]).nearest(&Vec3::zeros()).is_none());
    }

    #[test]
    fn mixed_color_extend() {
        let mut a = PointCloud::from_points(vec![Vec3::zeros()]);
        a.extend(&PointCloud::with_colors(
            vec![Vec3::zeros()],
            vec![[1, 2, 3]],
        ));
        assert_eq!(a.colors.as_ref().unwrap().len(), 2);
        a.push(Vec3::zeros(), None);
        assert_eq!(a.colors.unwrap()[2], [255; 3]);
    }
}
