//! 2D occupancy grid projected from the navigable and obstacle clouds, and
//! frontier extraction on top of it.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::MapError;
use crate::cloud::PointCloud;
use crate::geometry::Vec3;

pub const FREE: i8 = 1;
pub const OBSTACLE: i8 = -1;
pub const UNKNOWN: i8 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub x_min: f64,
    pub y_min: f64,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major over `i` (x index), i.e. `cells[i * ny + j]`.
    cells: Vec<i8>,
}

impl OccupancyGrid {
    pub fn new(x_min: f64, y_min: f64, resolution: f64, nx: usize, ny: usize) -> Self {
        Self {
            x_min,
            y_min,
            resolution,
            nx,
            ny,
            cells: vec![UNKNOWN; nx * ny],
        }
    }

    /// Builds a grid over a fixed window. Points outside the window are
    /// ignored. Obstacles take precedence over free space.
    pub fn from_clouds_in_window(
        navigable: &PointCloud,
        obstacles: &PointCloud,
        x_min: f64,
        y_min: f64,
        resolution: f64,
        nx: usize,
        ny: usize,
    ) -> Self {
        let mut g = Self::new(x_min, y_min, resolution, nx, ny);
        for p in navigable.iter() {
            if let Some((i, j)) = g.cell_of(p) {
                g.set(i, j, FREE);
            }
        }
        for p in obstacles.iter() {
            if let Some((i, j)) = g.cell_of(p) {
                g.set(i, j, OBSTACLE);
            }
        }
        g
    }

    /// Cell index of a planar point, without bounds checking.
    pub fn project(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.x_min) / self.resolution).floor() as i64,
            ((y - self.y_min) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_of(&self, p: &Vec3) -> Option<(usize, usize)> {
        self.cell_of_xy(p.x, p.y)
    }

    pub fn cell_of_xy(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (i, j) = self.project(x, y);
        self.in_bounds(i, j).then_some((i as usize, j as usize))
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.cells[i * self.ny + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        self.cells[i * self.ny + j] = v;
    }

    /// Cell value with out-of-grid reads reported as `None`.
    pub fn value(&self, i: i64, j: i64) -> Option<i8> {
        self.in_bounds(i, j)
            .then(|| self.get(i as usize, j as usize))
    }

    pub fn cells(&self) -> &[i8] {
        &self.cells
    }

    /// Min corner of cell `(i, j)`.
    pub fn cell_corner(&self, i: usize, j: usize) -> (f64, f64) {
        (
            i as f64 * self.resolution + self.x_min,
            j as f64 * self.resolution + self.y_min,
        )
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.resolution + self.x_min,
            (j as f64 + 0.5) * self.resolution + self.y_min,
        )
    }

    pub fn count(&self, v: i8) -> usize {
        self.cells.iter().filter(|&&c| c == v).count()
    }

    /// Binary PGM, top row = largest y. Unknown → 128, free → 255,
    /// obstacle → 0.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.nx, self.ny)?;
        let mut row = Vec::with_capacity(self.nx);
        for j in (0..self.ny).rev() {
            row.clear();
            for i in 0..self.nx {
                row.push(match self.get(i, j) {
                    FREE => 255u8,
                    OBSTACLE => 0,
                    _ => 128,
                });
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// Projects the navigable and obstacle clouds onto a grid covering both,
/// grown by one cell on every side so that cells on the edge of the observed
/// region can still border unknown space.
pub fn build_occupancy_grid(
    navigable: &PointCloud,
    obstacles: &PointCloud,
    resolution: f64,
) -> Result<OccupancyGrid, MapError> {
    let mut pts = navigable.iter().chain(obstacles.iter()).peekable();
    if pts.peek().is_none() {
        return Err(MapError::EmptyMap);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let x_min = x0 - resolution;
    let y_min = y0 - resolution;
    let x_max = x1 + resolution;
    let y_max = y1 + resolution;
    let nx = ((x_max - x_min) / resolution).ceil().max(1.0) as usize;
    let ny = ((y_max - y_min) / resolution).ceil().max(1.0) as usize;
    Ok(OccupancyGrid::from_clouds_in_window(
        navigable, obstacles, x_min, y_min, resolution, nx, ny,
    ))
}

const NEIGHBORS4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Free cells with at least one unknown 4-neighbour and no obstacle
/// 4-neighbour, in `(i, j)` order.
pub fn detect_frontiers(grid: &OccupancyGrid) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            if grid.get(i, j) != FREE {
                continue;
            }
            let mut unknown = false;
            let mut blocked = false;
            for (di, dj) in NEIGHBORS4 {
                match grid.value(i as i64 + di, j as i64 + dj) {
                    Some(UNKNOWN) => unknown = true,
                    Some(OBSTACLE) => blocked = true,
                    _ => {}
                }
            }
            if unknown && !blocked {
                out.push((i, j));
            }
        }
    }
    out
}

/// Lifts frontier cells to world points at floor height using each cell's
/// min corner.
pub fn frontiers_to_world(
    cells: &[(usize, usize)],
    grid: &OccupancyGrid,
    z_floor: f64,
) -> Result<PointCloud, MapError> {
    let mut pts = Vec::with_capacity(cells.len());
    for &(i, j) in cells {
        if i >= grid.nx || j >= grid.ny {
            return Err(MapError::CellOutOfBounds { i, j });
        }
        let (x, y) = grid.cell_corner(i, j);
        pts.push(Vec3::new(x, y, z_floor));
    }
    Ok(PointCloud::from_points(pts))
}
