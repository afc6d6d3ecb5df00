//! Grid indexing shared by perception, the costmap and the planner.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, Point2};

/// Cell address. Ordering is row-major: rows first, then columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridIndex {
    pub col: u32,
    pub row: u32,
}

impl GridIndex {
    pub const fn new(col: u32, row: u32) -> Self {
        Self { col, row }
    }

    /// Chebyshev-adjacent (8-neighbour), excluding the cell itself.
    pub fn is_neighbor(&self, other: &GridIndex) -> bool {
        let dc = (self.col as i64 - other.col as i64).abs();
        let dr = (self.row as i64 - other.row as i64).abs();
        dc <= 1 && dr <= 1 && (dc + dr) > 0
    }

    pub fn offset(&self, dc: i64, dr: i64) -> Option<GridIndex> {
        let c = self.col as i64 + dc;
        let r = self.row as i64 + dr;
        (c >= 0 && r >= 0 && c <= u32::MAX as i64 && r <= u32::MAX as i64)
            .then(|| GridIndex::new(c as u32, r as u32))
    }
}

impl Ord for GridIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for GridIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GridIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.col, self.row)
    }
}

/// Placement of a regular grid in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: u32,
    pub height: u32,
    /// Meters per cell.
    pub resolution: f64,
    /// World coordinates of the lower-left corner of cell (0, 0).
    pub origin: Point2,
}

impl GridGeometry {
    pub fn new(width: u32, height: u32, resolution: f64, origin: Point2) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        Self {
            width,
            height,
            resolution,
            origin,
        }
    }

    /// Smallest grid covering `width_m × height_m` starting at `origin`.
    pub fn covering(width_m: f64, height_m: f64, resolution: f64, origin: Point2) -> Self {
        let cells = |m: f64| ((m / resolution) - 1e-9).ceil().max(1.0) as u32;
        Self::new(cells(width_m), cells(height_m), resolution, origin)
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        idx.col < self.width && idx.row < self.height
    }

    /// Row-major offset into per-cell arrays.
    pub fn linear(&self, idx: GridIndex) -> usize {
        idx.row as usize * self.width as usize + idx.col as usize
    }

    pub fn index_of(&self, linear: usize) -> GridIndex {
        let w = self.width as usize;
        GridIndex::new((linear % w) as u32, (linear / w) as u32)
    }

    /// Unbounded floor indexing; may return negative or out-of-range cells.
    pub fn world_to_cell_raw(&self, p: Point2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn world_to_cell(&self, p: Point2) -> Option<GridIndex> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return None;
        }
        let (c, r) = self.world_to_cell_raw(p);
        (c >= 0 && r >= 0 && c < self.width as i64 && r < self.height as i64)
            .then(|| GridIndex::new(c as u32, r as u32))
    }

    pub fn cell_center(&self, idx: GridIndex) -> Point2 {
        Point2::new(
            self.origin.x + (idx.col as f64 + 0.5) * self.resolution,
            self.origin.y + (idx.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn neighbors8(&self, idx: GridIndex) -> impl Iterator<Item = GridIndex> + '_ {
        const STEPS: [(i64, i64); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        STEPS
            .iter()
            .filter_map(move |&(dc, dr)| idx.offset(dc, dr))
            .filter(move |n| self.contains(*n))
    }

    /// In-bounds cells whose centres lie inside the polygon, in row-major order.
    pub fn rasterize_polygon(&self, poly: &[Point2]) -> Vec<GridIndex> {
        if poly.len() < 3 {
            return Vec::new();
        }
        let (lo, hi) = geometry::bounds(poly);
        let (c0, r0) = self.world_to_cell_raw(lo);
        let (c1, r1) = self.world_to_cell_raw(hi);
        let c0 = c0.max(0);
        let r0 = r0.max(0);
        let c1 = c1.min(self.width as i64 - 1);
        let r1 = r1.min(self.height as i64 - 1);
        let mut out = Vec::new();
        for r in r0..=r1 {
            for c in c0..=c1 {
                let idx = GridIndex::new(c as u32, r as u32);
                if geometry::point_in_polygon(self.cell_center(idx), poly) {
                    out.push(idx);
                }
            }
        }
        out
    }
}
