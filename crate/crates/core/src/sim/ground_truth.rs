//! Shortest collision-free path lengths on the true scene.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::scene::Scene;
use crate::geometry::Vec2;

/// Fine grid over the scene bounds; a cell is free when its center keeps
/// `radius` clearance from blocking geometry.
#[derive(Debug, Clone)]
pub struct GroundTruthGrid {
    pub x0: f64,
    pub y0: f64,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    free: Vec<bool>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl GroundTruthGrid {
    pub fn new(scene: &Scene, walkable: &[String], radius: f64, cell: f64) -> Self {
        let [x0, y0, x1, y1] = scene.bounds;
        let nx = ((x1 - x0) / cell).ceil() as usize;
        let ny = ((y1 - y0) / cell).ceil() as usize;
        let mut free = vec![false; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                let c = Vec2::new(x0 + (i as f64 + 0.5) * cell, y0 + (j as f64 + 0.5) * cell);
                free[i * ny + j] = scene.clearance(c, walkable) >= radius;
            }
        }
        Self {
            x0,
            y0,
            cell,
            nx,
            ny,
            free,
        }
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.x0 + (i as f64 + 0.5) * self.cell,
            self.y0 + (j as f64 + 0.5) * self.cell,
        )
    }

    fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let i = ((p.x - self.x0) / self.cell).floor();
        let j = ((p.y - self.y0) / self.cell).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny)
            .then_some((i as usize, j as usize))
    }

    fn ok(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.free[i as usize * self.ny + j as usize]
    }

    /// Dijkstra from `start` to the nearest cell accepted by `goal`; returns
    /// the cell-center path, beginning at `start` itself.
    pub fn shortest_path(&self, start: Vec2, goal: impl Fn(Vec2) -> bool) -> Option<Vec<Vec2>> {
        let s = self.cell_of(start)?;
        let ny = self.ny;
        let mut dist = vec![f64::INFINITY; self.nx * ny];
        let mut parent = vec![usize::MAX; self.nx * ny];
        let mut heap = BinaryHeap::new();
        dist[s.0 * ny + s.1] = 0.0;
        heap.push(Item(0.0, s.0 * ny + s.1));
        let mut reached = None;
        while let Some(Item(d, k)) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            let (i, j) = (k / ny, k % ny);
            if goal(self.center(i, j)) {
                reached = Some(k);
                break;
            }
            for (di, dj) in [
                (1, 0),
                (0, 1),
                (-1, 0),
                (0, -1),
                (1, 1),
                (-1, 1),
                (-1, -1),
                (1, -1),
            ] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if !self.ok(a, b) {
                    continue;
                }
                if di != 0
                    && dj != 0
                    && !(self.ok(i as i64 + di, j as i64) && self.ok(i as i64, j as i64 + dj))
                {
                    continue;
                }
                let step = if di != 0 && dj != 0 { SQRT_2 } else { 1.0 } * self.cell;
                let n = a as usize * ny + b as usize;
                if d + step < dist[n] {
                    dist[n] = d + step;
                    parent[n] = k;
                    heap.push(Item(d + step, n));
                }
            }
        }
        let mut k = reached?;
        let mut cells = vec![k];
        while parent[k] != usize::MAX {
            k = parent[k];
            cells.push(k);
        }
        cells.reverse();
        let mut path = vec![start];
        path.extend(cells.iter().skip(1).map(|&k| self.center(k / ny, k % ny)));
        Some(path)
    }

    /// Segment check sampled at a quarter cell.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let n = ((b - a).norm() / (self.cell * 0.25)).ceil().max(1.0) as usize;
        (0..=n).all(|k| {
            let p = a + (b - a) * (k as f64 / n as f64);
            self.cell_of(p)
                .is_some_and(|(i, j)| self.free[i * self.ny + j])
        })
    }
}

/// Length of the shortest path from `start` keeping `radius` clearance that
/// ends within `success_distance` of an instance of `target`. The grid path
/// is shortcut wherever the straight segment stays on free cells.
pub fn shortest_path_length(
    scene: &Scene,
    walkable: &[String],
    start: Vec2,
    target: &str,
    radius: f64,
    cell: f64,
    success_distance: f64,
) -> Option<f64> {
    if scene.distance_to_class(start, target)? <= success_distance {
        return Some(0.0);
    }
    let grid = GroundTruthGrid::new(scene, walkable, radius, cell);
    let within = |p: Vec2| {
        scene
            .distance_to_class(p, target)
            .is_some_and(|d| d <= success_distance)
    };
    let raw = grid.shortest_path(start, within)?;
    let mut length = 0.0;
    let mut anchor = 0;
    while anchor < raw.len() - 1 {
        let mut next = anchor + 1;
        for k in (anchor + 2..raw.len()).rev() {
            if grid.segment_clear(raw[anchor], raw[k]) {
                next = k;
                break;
            }
        }
        length += (raw[next] - raw[anchor]).norm();
        anchor = next;
    }
    Some(length)
}
