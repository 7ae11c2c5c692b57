//! Planar primitives shared by every module: points, poses, grid cells and
//! the fixed-resolution grid geometry that maps between them.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn sub(&self, other: &Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(&self, other: &Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(&self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(&self, other: &Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

/// Robot position and heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in (−π, π].
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Map a point expressed in this pose's body frame into the world frame.
    pub fn transform(&self, local: &Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }
}

/// A grid cell. `row` indexes y, `col` indexes x; row 0 is the bottom row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Chebyshev distance in cells.
    pub fn chebyshev(&self, other: &Cell) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

/// Fixed-resolution grid anchored at the world origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        Self {
            width,
            height,
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn contains_point(&self, p: &Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width_m() && p.y < self.height_m()
    }

    pub fn cell_of(&self, p: &Point2) -> Option<Cell> {
        if !self.contains_point(p) {
            return None;
        }
        let col = ((p.x / self.resolution) as usize).min(self.width - 1);
        let row = ((p.y / self.resolution) as usize).min(self.height - 1);
        Some(Cell::new(row, col))
    }

    pub fn center(&self, cell: Cell) -> Point2 {
        Point2::new(
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| Cell::new(r, c)))
    }

    /// 8-connected neighbors inside the grid.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const D: [(i64, i64); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        D.iter().filter_map(move |&(dr, dc)| self.offset(cell, dr, dc))
    }

    pub fn neighbors4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const D: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        D.iter().filter_map(move |&(dr, dc)| self.offset(cell, dr, dc))
    }

    pub fn offset(&self, cell: Cell, dr: i64, dc: i64) -> Option<Cell> {
        let r = cell.row as i64 + dr;
        let c = cell.col as i64 + dc;
        if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
            None
        } else {
            Some(Cell::new(r as usize, c as usize))
        }
    }

    /// Cells whose centers lie within `radius` meters of `p`.
    pub fn cells_within(&self, p: &Point2, radius: f64) -> Vec<Cell> {
        let res = self.resolution;
        let r0 = (((p.y - radius) / res).floor().max(0.0)) as usize;
        let c0 = (((p.x - radius) / res).floor().max(0.0)) as usize;
        let r1 = (((p.y + radius) / res).ceil().max(0.0) as usize).min(self.height);
        let c1 = (((p.x + radius) / res).ceil().max(0.0) as usize).min(self.width);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for row in r0..r1 {
            for col in c0..c1 {
                let cell = Cell::new(row, col);
                if self.center(cell).distance_sq(p) <= r2 {
                    out.push(cell);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-3.5 * PI) - 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn cell_center_round_trip() {
        let g = GridGeometry::new(10, 8, 0.25);
        for cell in g.cells() {
            assert_eq!(g.cell_of(&g.center(cell)), Some(cell));
            assert_eq!(g.cell_at(g.index(cell)), cell);
        }
        assert_eq!(g.cell_of(&Point2::new(-0.1, 0.0)), None);
        assert_eq!(g.cell_of(&Point2::new(2.5, 0.0)), None);
    }

    #[test]
    fn body_to_world_transform() {
        let pose = Pose2D::new(1.0, 2.0, PI / 2.0);
        let p = pose.transform(&Point2::new(1.0, 0.0));
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 3.0).abs() < 1e-12);
    }
}
