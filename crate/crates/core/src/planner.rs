//! 8-connected A* over the composed costmap.
//!
//! Entering a cell costs its step length (1 or √2 cells) times `base_cost`,
//! plus the cell's cost when it belongs to or is inflated from a movable
//! object. Fatal cells are never entered and diagonal moves may not squeeze
//! between two fatal cells. The straight-line heuristic never overestimates
//! because extras are non-negative.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::Serialize;
use thiserror::Error;

use crate::costmap::{CellSource, ComposedGrid};
use crate::geometry::{Point2, Pose2D};
use crate::grid::GridIndex;
use crate::world::ObjectId;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("start cell is fatal")]
    StartBlocked,
    #[error("goal is unreachable")]
    NoPath,
    #[error("{which} ({x}, {y}) is outside the map")]
    OutOfBounds { which: &'static str, x: f64, y: f64 },
    #[error("waypoints {0} and {1} are not 8-neighbours")]
    BrokenChain(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Cost of one orthogonal cell step.
    pub base_cost: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { base_cost: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedPath {
    pub cells: Vec<GridIndex>,
    /// Cell centres in the world frame, parallel to `cells`.
    pub waypoints: Vec<Point2>,
    pub total_cost: f64,
    /// Movable objects whose cells the path enters, in first-contact order.
    pub crossed_objects: Vec<ObjectId>,
}

impl PlannedPath {
    pub fn from_cells(grid: &ComposedGrid, cells: Vec<GridIndex>, cfg: &PlannerConfig) -> Result<Self, PlanError> {
        let total_cost = path_cost(grid, &cells, cfg)?;
        let geometry = grid.geometry();
        let waypoints = cells.iter().map(|c| geometry.cell_center(*c)).collect();
        let mut crossed_objects = Vec::new();
        for c in &cells {
            if let Some(id) = grid.get(*c).movable_object() {
                if !crossed_objects.contains(&id) {
                    crossed_objects.push(id);
                }
            }
        }
        Ok(Self {
            cells,
            waypoints,
            total_cost,
            crossed_objects,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn goal(&self) -> Option<Point2> {
        self.waypoints.last().copied()
    }

    /// Index of the waypoint nearest to `p` (first one on ties).
    pub fn nearest_index(&self, p: Point2) -> Option<usize> {
        self.waypoints
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.distance(p).total_cmp(&b.1.distance(p)).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    /// Comma-separated `x,y` lines, one per waypoint.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for w in &self.waypoints {
            s.push_str(&format!("{},{}\n", w.x, w.y));
        }
        s
    }
}

/// Extra cost for entering `cell`: its cost if it is a traversable cell
/// carrying movable-object cost, otherwise 0.
fn extra(grid: &ComposedGrid, cell: GridIndex) -> u32 {
    let c = grid.get(cell);
    if c.is_fatal() {
        0
    } else {
        c.cost as u32
    }
}

fn is_diagonal(a: GridIndex, b: GridIndex) -> bool {
    a.col != b.col && a.row != b.row
}

/// Whether a single step `from → to` between neighbours is allowed.
pub fn step_allowed(grid: &ComposedGrid, from: GridIndex, to: GridIndex) -> bool {
    if grid.get(to).is_fatal() {
        return false;
    }
    if is_diagonal(from, to) {
        let side_a = GridIndex::new(to.col, from.row);
        let side_b = GridIndex::new(from.col, to.row);
        if grid.get(side_a).is_fatal() && grid.get(side_b).is_fatal() {
            return false;
        }
    }
    true
}

/// Recompute the cost of a cell chain. The sum is formed as
/// `base · (orthogonal + diagonal·√2) + Σ extras` so that equal-cost paths
/// give bit-identical totals.
pub fn path_cost(grid: &ComposedGrid, cells: &[GridIndex], cfg: &PlannerConfig) -> Result<f64, PlanError> {
    let mut orth = 0u64;
    let mut diag = 0u64;
    let mut extras = 0u64;
    for (i, w) in cells.windows(2).enumerate() {
        if !w[0].is_neighbor(&w[1]) || !grid.geometry().contains(w[1]) {
            return Err(PlanError::BrokenChain(i, i + 1));
        }
        if is_diagonal(w[0], w[1]) {
            diag += 1;
        } else {
            orth += 1;
        }
        extras += extra(grid, w[1]) as u64;
    }
    Ok(cfg.base_cost * (orth as f64 + diag as f64 * SQRT_2) + extras as f64)
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    cell: GridIndex,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // Reversed so that BinaryHeap pops the smallest (f, h, cell).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.cell.cmp(&self.cell))
    }
}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Search bookkeeping, mostly for tests and benches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub expanded: usize,
    /// `f` of every expanded node in extraction order.
    pub expansion_f: Vec<f64>,
}

pub fn plan_astar(grid: &ComposedGrid, start: Point2, goal: Point2) -> Result<PlannedPath, PlanError> {
    plan_astar_with(grid, start, goal, &PlannerConfig::default()).map(|(p, _)| p)
}

pub fn plan_astar_with(
    grid: &ComposedGrid,
    start: Point2,
    goal: Point2,
    cfg: &PlannerConfig,
) -> Result<(PlannedPath, SearchStats), PlanError> {
    let g = grid.geometry();
    let start_cell = g.world_to_cell(start).ok_or(PlanError::OutOfBounds {
        which: "start",
        x: start.x,
        y: start.y,
    })?;
    let goal_cell = g.world_to_cell(goal).ok_or(PlanError::OutOfBounds {
        which: "goal",
        x: goal.x,
        y: goal.y,
    })?;
    plan_cells(grid, start_cell, goal_cell, cfg)
}

pub fn plan_cells(
    grid: &ComposedGrid,
    start: GridIndex,
    goal: GridIndex,
    cfg: &PlannerConfig,
) -> Result<(PlannedPath, SearchStats), PlanError> {
    if grid.get(start).is_fatal() {
        return Err(PlanError::StartBlocked);
    }
    if grid.get(goal).is_fatal() {
        return Err(PlanError::NoPath);
    }
    let geom = grid.geometry();
    let heuristic = |c: GridIndex| {
        let dc = c.col as f64 - goal.col as f64;
        let dr = c.row as f64 - goal.row as f64;
        dc.hypot(dr) * cfg.base_cost
    };

    let n = geom.len();
    let mut best_g = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut stats = SearchStats::default();

    let s = geom.linear(start);
    best_g[s] = 0.0;
    let h0 = heuristic(start);
    open.push(OpenEntry { f: h0, h: h0, cell: start });

    while let Some(OpenEntry { f, cell, .. }) = open.pop() {
        let ci = geom.linear(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        stats.expanded += 1;
        stats.expansion_f.push(f);
        if cell == goal {
            let mut cells = vec![cell];
            let mut cur = ci;
            while parent[cur] != u32::MAX {
                cur = parent[cur] as usize;
                cells.push(geom.index_of(cur));
            }
            cells.reverse();
            let path = PlannedPath::from_cells(grid, cells, cfg)?;
            return Ok((path, stats));
        }
        for nb in geom.neighbors8(cell) {
            let ni = geom.linear(nb);
            if closed[ni] || !step_allowed(grid, cell, nb) {
                continue;
            }
            let step = if is_diagonal(cell, nb) { SQRT_2 } else { 1.0 };
            let tentative = best_g[ci] + step * cfg.base_cost + extra(grid, nb) as f64;
            if tentative < best_g[ni] {
                best_g[ni] = tentative;
                parent[ni] = ci as u32;
                let h = heuristic(nb);
                open.push(OpenEntry {
                    f: tentative + h,
                    h,
                    cell: nb,
                });
            }
        }
    }
    Err(PlanError::NoPath)
}

/// First movable object whose own cells (not its inflation) the path enters
/// ahead of the robot, with the waypoint index of that cell.
pub fn first_blocking_object(
    grid: &ComposedGrid,
    path: &PlannedPath,
    robot_pose: &Pose2D,
) -> Option<(ObjectId, usize)> {
    let from = path.nearest_index(robot_pose.position())?;
    path.cells
        .iter()
        .enumerate()
        .skip(from)
        .find_map(|(i, c)| {
            let cell = grid.try_get(*c)?;
            match (cell.source, cell.object_id) {
                (CellSource::MovableObject, Some(id)) => Some((id, i)),
                _ => None,
            }
        })
}
