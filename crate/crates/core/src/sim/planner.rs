//! Shortest 8-connected paths over the free cells of an occupancy grid.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::SQRT_2;

use crate::geometry::Vec2;
use crate::semantic_map::{OccupancyGrid, FREE, OBSTACLE, UNKNOWN};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("start outside grid")]
    StartOutside,
    #[error("goal outside grid or not traversable")]
    GoalBlocked,
    #[error("goal unreachable")]
    Unreachable,
}

/// Neighbour order fixes tie-breaking between equal-cost paths.
const MOVES: [(i64, i64); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

/// Free cells at least `inflation` (center to center) from every obstacle
/// cell. With `fill > 0`, unknown cells within `fill` cells (Chebyshev) of a
/// free cell count as free, closing the gaps between sparse floor samples.
#[derive(Debug, Clone)]
pub struct Traversability {
    nx: usize,
    ny: usize,
    ok: Vec<bool>,
}

impl Traversability {
    pub fn new(grid: &OccupancyGrid, inflation: f64, fill: usize) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut ok: Vec<bool> = grid.cells().iter().map(|&c| c == FREE).collect();
        if fill > 0 {
            let f = fill as i64;
            let base = ok.clone();
            for i in 0..nx {
                for j in 0..ny {
                    if grid.get(i, j) != UNKNOWN {
                        continue;
                    }
                    ok[i * ny + j] = (-f..=f).any(|di| {
                        (-f..=f).any(|dj| {
                            let (a, b) = (i as i64 + di, j as i64 + dj);
                            grid.in_bounds(a, b) && base[a as usize * ny + b as usize]
                        })
                    });
                }
            }
        }
        let r = (inflation / grid.resolution).max(0.0);
        let reach = r.ceil() as i64;
        let mut offsets = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                if ((di * di + dj * dj) as f64).sqrt() <= r + 1e-9 {
                    offsets.push((di, dj));
                }
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                if grid.get(i, j) != OBSTACLE {
                    continue;
                }
                for &(di, dj) in &offsets {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if grid.in_bounds(a, b) {
                        ok[a as usize * ny + b as usize] = false;
                    }
                }
            }
        }
        Self { nx, ny, ok }
    }

    pub fn is_ok(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.ok[i as usize * self.ny + j as usize]
    }

    fn set(&mut self, i: usize, j: usize, v: bool) {
        self.ok[i * self.ny + j] = v;
    }

    /// Lets the agent leave the inflated band it may be standing in: the
    /// start cell and every non-obstacle cell connected to it through
    /// non-traversable ones become traversable.
    fn open_escape(&mut self, grid: &OccupancyGrid, start: (usize, usize)) {
        if self.is_ok(start.0 as i64, start.1 as i64) {
            return;
        }
        let mut queue = VecDeque::from([start]);
        self.set(start.0, start.1, true);
        while let Some((i, j)) = queue.pop_front() {
            for (di, dj) in &MOVES[..4] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if matches!(grid.value(a, b), Some(FREE) | Some(UNKNOWN)) && !self.is_ok(a, b) {
                    self.set(a as usize, b as usize, true);
                    queue.push_back((a as usize, b as usize));
                }
            }
        }
    }

    fn step_allowed(&self, i: i64, j: i64, di: i64, dj: i64) -> bool {
        self.is_ok(i + di, j + dj)
            && (di == 0 || dj == 0 || (self.is_ok(i + di, j) && self.is_ok(i, j + dj)))
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    seq: u64,
    cell: (usize, usize),
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = (a.0 as f64 - b.0 as f64).abs();
    let dy = (a.1 as f64 - b.1 as f64).abs();
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

/// Reusable planner over one grid snapshot.
pub struct GridPlanner<'a> {
    grid: &'a OccupancyGrid,
    pass: Traversability,
    start: (usize, usize),
    from: Vec2,
}

impl<'a> GridPlanner<'a> {
    pub fn new(grid: &'a OccupancyGrid, from: Vec2, inflation: f64) -> Result<Self, PlanError> {
        Self::with_fill(grid, from, inflation, 0)
    }

    /// Planner that also crosses unknown cells within `fill` cells of free
    /// space.
    pub fn with_fill(
        grid: &'a OccupancyGrid,
        from: Vec2,
        inflation: f64,
        fill: usize,
    ) -> Result<Self, PlanError> {
        let start = grid
            .cell_of_xy(from.x, from.y)
            .ok_or(PlanError::StartOutside)?;
        let mut pass = Traversability::new(grid, inflation, fill);
        pass.open_escape(grid, start);
        Ok(Self {
            grid,
            pass,
            start,
            from,
        })
    }

    /// Marks cells whose centers lie within `radius` of `center` as blocked.
    /// The start cell stays open.
    pub fn block_disc(&mut self, center: Vec2, radius: f64) {
        let grid = self.grid;
        let reach = (radius / grid.resolution).ceil() as i64 + 1;
        let (ci, cj) = grid.project(center.x, center.y);
        for i in ci - reach..=ci + reach {
            for j in cj - reach..=cj + reach {
                if !grid.in_bounds(i, j) || (i as usize, j as usize) == self.start {
                    continue;
                }
                let (x, y) = grid.cell_center(i as usize, j as usize);
                if (Vec2::new(x, y) - center).norm() <= radius {
                    self.pass.set(i as usize, j as usize, false);
                }
            }
        }
    }

    /// Cells reachable from the start.
    pub fn reachable(&self) -> Vec<bool> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start.0 * ny + self.start.1] = true;
        while let Some((i, j)) = queue.pop_front() {
            for (di, dj) in MOVES {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if self.pass.step_allowed(i as i64, j as i64, di, dj) {
                    let k = a as usize * ny + b as usize;
                    if !seen[k] {
                        seen[k] = true;
                        queue.push_back((a as usize, b as usize));
                    }
                }
            }
        }
        seen
    }

    pub fn is_reachable(&self, reach: &[bool], p: Vec2) -> bool {
        self.grid
            .cell_of_xy(p.x, p.y)
            .is_some_and(|(i, j)| reach[i * self.grid.ny + j])
    }

    /// A* to `to`. The path starts at the start position, runs through cell
    /// centers and ends exactly at `to`.
    pub fn plan(&self, to: Vec2) -> Result<Vec<Vec2>, PlanError> {
        let grid = self.grid;
        let goal = grid.cell_of_xy(to.x, to.y).ok_or(PlanError::GoalBlocked)?;
        if !self.pass.is_ok(goal.0 as i64, goal.1 as i64) {
            return Err(PlanError::GoalBlocked);
        }
        let ny = grid.ny;
        let idx = |c: (usize, usize)| c.0 * ny + c.1;
        let mut g = vec![f64::INFINITY; grid.nx * ny];
        let mut parent = vec![usize::MAX; grid.nx * ny];
        let mut closed = vec![false; grid.nx * ny];
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        g[idx(self.start)] = 0.0;
        heap.push(Open {
            f: octile(self.start, goal),
            seq,
            cell: self.start,
        });
        while let Some(Open { cell, .. }) = heap.pop() {
            let ci = idx(cell);
            if closed[ci] {
                continue;
            }
            closed[ci] = true;
            if cell == goal {
                break;
            }
            for (di, dj) in MOVES {
                if !self.pass.step_allowed(cell.0 as i64, cell.1 as i64, di, dj) {
                    continue;
                }
                let next = ((cell.0 as i64 + di) as usize, (cell.1 as i64 + dj) as usize);
                let ni = idx(next);
                let cost = if di != 0 && dj != 0 { SQRT_2 } else { 1.0 };
                let cand = g[ci] + cost;
                if cand < g[ni] {
                    g[ni] = cand;
                    parent[ni] = ci;
                    seq += 1;
                    heap.push(Open {
                        f: cand + octile(next, goal),
                        seq,
                        cell: next,
                    });
                }
            }
        }
        if !g[idx(goal)].is_finite() {
            return Err(PlanError::Unreachable);
        }
        let mut cells = vec![idx(goal)];
        while *cells.last().unwrap() != idx(self.start) {
            cells.push(parent[*cells.last().unwrap()]);
        }
        cells.reverse();
        let mut path = vec![self.from];
        for &c in cells.iter().skip(1).take(cells.len().saturating_sub(2)) {
            let (x, y) = grid.cell_center(c / ny, c % ny);
            path.push(Vec2::new(x, y));
        }
        path.push(to);
        Ok(path)
    }
}

impl GridPlanner<'_> {
    /// True iff every cell touched by segment `a`–`b` (sampled at a quarter
    /// cell) is traversable.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let n = ((b - a).norm() / (self.grid.resolution * 0.25))
            .ceil()
            .max(1.0) as usize;
        (0..=n).all(|k| {
            let p = a + (b - a) * (k as f64 / n as f64);
            let (i, j) = self.grid.project(p.x, p.y);
            self.pass.is_ok(i, j)
        })
    }

    /// Like [`GridPlanner::plan`], with vertices dropped while the shortcut
    /// stays on traversable cells.
    pub fn plan_smoothed(&self, to: Vec2) -> Result<Vec<Vec2>, PlanError> {
        let raw = self.plan(to)?;
        let mut out = vec![raw[0]];
        let mut anchor = 0;
        while anchor < raw.len() - 1 {
            let mut next = anchor + 1;
            for k in (anchor + 2..raw.len()).rev() {
                if self.segment_clear(raw[anchor], raw[k]) {
                    next = k;
                    break;
                }
            }
            out.push(raw[next]);
            anchor = next;
        }
        Ok(out)
    }
}

/// One-shot planning.
pub fn plan_path(
    grid: &OccupancyGrid,
    from: Vec2,
    to: Vec2,
    inflation: f64,
) -> Result<Vec<Vec2>, PlanError> {
    GridPlanner::new(grid, from, inflation)?.plan(to)
}

pub fn path_length(path: &[Vec2]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Points every `step` meters along the polyline, ending at its last vertex.
pub fn resample(path: &[Vec2], step: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    let Some(&first) = path.first() else {
        return out;
    };
    let mut carried = 0.0;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = (b - a).norm();
        if seg == 0.0 {
            continue;
        }
        let mut s = step - carried;
        while s <= seg {
            let p = a + (b - a) * (s / seg);
            out.push(p);
            s += step;
        }
        carried = seg - (s - step);
    }
    let last = *path.last().unwrap();
    if out.last().is_none_or(|&p| p != last) && last != first {
        out.push(last);
    }
    out
}
