//! Layered costmap: a static (fatal) layer, an object layer carrying
//! per-class push costs and object ids, and a uniform inflation pass that
//! composes both into the grid the planner reads.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::geometry::Point2;
use crate::grid::{GridGeometry, GridIndex};
use crate::world::{ObjectClass, ObjectId, FATAL};

#[derive(Debug, Error, PartialEq)]
pub enum CostmapError {
    #[error("cell {0} is outside the map")]
    CellOutOfBounds(GridIndex),
    #[error("point ({x}, {y}) is outside the map")]
    PointOutOfBounds { x: f64, y: f64 },
    #[error("no object with id {0} in the costmap")]
    UnknownObject(ObjectId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSource {
    Free,
    Static,
    MovableObject,
    UnmovableObject,
    Inflation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostCell {
    pub cost: u8,
    pub object_id: Option<ObjectId>,
    pub source: CellSource,
}

impl CostCell {
    pub const FREE: CostCell = CostCell {
        cost: 0,
        object_id: None,
        source: CellSource::Free,
    };

    pub fn is_free(&self) -> bool {
        self.source == CellSource::Free
    }

    pub fn is_fatal(&self) -> bool {
        self.cost == FATAL
    }

    /// A traversable cell that belongs to (or is inflated from) a movable object.
    pub fn movable_object(&self) -> Option<ObjectId> {
        if self.is_fatal() {
            None
        } else {
            self.object_id
        }
    }
}

/// Immutable composed layer; cheap to share with a planner via `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedGrid {
    geometry: GridGeometry,
    cells: Vec<CostCell>,
}

impl ComposedGrid {
    pub fn from_cells(geometry: GridGeometry, cells: Vec<CostCell>) -> Self {
        assert_eq!(cells.len(), geometry.len());
        Self { geometry, cells }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[CostCell] {
        &self.cells
    }

    /// Panics outside the grid.
    pub fn get(&self, idx: GridIndex) -> &CostCell {
        &self.cells[self.geometry.linear(idx)]
    }

    pub fn try_get(&self, idx: GridIndex) -> Option<&CostCell> {
        self.geometry
            .contains(idx)
            .then(|| &self.cells[self.geometry.linear(idx)])
    }

    pub fn cell_at(&self, p: Point2) -> Result<(GridIndex, CostCell), CostmapError> {
        let idx = self
            .geometry
            .world_to_cell(p)
            .ok_or(CostmapError::PointOutOfBounds { x: p.x, y: p.y })?;
        Ok((idx, *self.get(idx)))
    }

    /// Binary 8-bit PGM, north-up: pixel = 255 − cost, so free is white and
    /// fatal is black.
    pub fn write_pgm(&self, out: &mut impl Write) -> io::Result<()> {
        let g = &self.geometry;
        write!(out, "P5\n# namo-costmap resolution={}\n{} {}\n255\n", g.resolution, g.width, g.height)?;
        let mut buf = Vec::with_capacity(g.len());
        for row in (0..g.height).rev() {
            for col in 0..g.width {
                buf.push(255 - self.get(GridIndex::new(col, row)).cost);
            }
        }
        out.write_all(&buf)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ObjectEntry {
    class: ObjectClass,
    cells: BTreeSet<GridIndex>,
}

#[derive(Debug, Clone)]
pub struct LayeredCostmap {
    geometry: GridGeometry,
    inflation_radius: f64,
    static_layer: Vec<CostCell>,
    object_layer: Vec<CostCell>,
    objects: BTreeMap<ObjectId, ObjectEntry>,
    forced_unmovable: BTreeSet<ObjectId>,
    composed: Arc<ComposedGrid>,
}

impl LayeredCostmap {
    pub fn new(geometry: GridGeometry, inflation_radius: f64) -> Self {
        assert!(inflation_radius >= 0.0);
        let n = geometry.len();
        Self {
            geometry,
            inflation_radius,
            static_layer: vec![CostCell::FREE; n],
            object_layer: vec![CostCell::FREE; n],
            objects: BTreeMap::new(),
            forced_unmovable: BTreeSet::new(),
            composed: Arc::new(ComposedGrid::from_cells(geometry, vec![CostCell::FREE; n])),
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn inflation_radius(&self) -> f64 {
        self.inflation_radius
    }

    pub fn static_layer(&self) -> &[CostCell] {
        &self.static_layer
    }

    pub fn object_layer(&self) -> &[CostCell] {
        &self.object_layer
    }

    /// The composed layer as of the last [`inflate_and_compose`](Self::inflate_and_compose).
    pub fn composed(&self) -> &ComposedGrid {
        &self.composed
    }

    pub fn snapshot(&self) -> Arc<ComposedGrid> {
        Arc::clone(&self.composed)
    }

    pub fn cell_at(&self, p: Point2) -> Result<(GridIndex, CostCell), CostmapError> {
        self.composed.cell_at(p)
    }

    pub fn object_ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects.keys().copied()
    }

    pub fn object_cells(&self, id: ObjectId) -> Option<&BTreeSet<GridIndex>> {
        self.objects.get(&id).map(|e| &e.cells)
    }

    pub fn object_class(&self, id: ObjectId) -> Option<ObjectClass> {
        self.objects.get(&id).map(|e| e.class)
    }

    pub fn is_forced_unmovable(&self, id: ObjectId) -> bool {
        self.forced_unmovable.contains(&id)
    }

    fn check_bounds<'a>(&self, cells: impl IntoIterator<Item = &'a GridIndex>) -> Result<(), CostmapError> {
        match cells.into_iter().find(|c| !self.geometry.contains(**c)) {
            Some(c) => Err(CostmapError::CellOutOfBounds(*c)),
            None => Ok(()),
        }
    }

    /// Mark cells as static obstacles (fatal).
    pub fn set_static<'a>(&mut self, cells: impl IntoIterator<Item = &'a GridIndex> + Clone) -> Result<(), CostmapError> {
        self.check_bounds(cells.clone())?;
        for c in cells {
            let i = self.geometry.linear(*c);
            self.static_layer[i] = CostCell {
                cost: FATAL,
                object_id: None,
                source: CellSource::Static,
            };
        }
        Ok(())
    }

    /// Replace the cells of object `id`. Objects previously marked unmovable
    /// stay fatal whatever class is supplied.
    pub fn upsert_object<'a>(
        &mut self,
        id: ObjectId,
        class: ObjectClass,
        cells: impl IntoIterator<Item = &'a GridIndex> + Clone,
    ) -> Result<(), CostmapError> {
        self.check_bounds(cells.clone())?;
        let class = if self.forced_unmovable.contains(&id) {
            class.as_unmovable()
        } else {
            class
        };
        let entry = ObjectEntry {
            class,
            cells: cells.into_iter().copied().collect(),
        };
        if self.objects.get(&id) != Some(&entry) {
            self.objects.insert(id, entry);
            self.rebuild_object_layer();
        }
        Ok(())
    }

    pub fn remove_object(&mut self, id: ObjectId) -> Result<(), CostmapError> {
        self.objects.remove(&id).ok_or(CostmapError::UnknownObject(id))?;
        self.rebuild_object_layer();
        Ok(())
    }

    /// Make object `id` fatal now and for every later upsert.
    pub fn mark_object_unmovable(&mut self, id: ObjectId) -> Result<(), CostmapError> {
        let entry = self
            .objects
            .get_mut(&id)
            .ok_or(CostmapError::UnknownObject(id))?;
        self.forced_unmovable.insert(id);
        if entry.class.movable {
            entry.class = entry.class.as_unmovable();
            self.rebuild_object_layer();
        }
        Ok(())
    }

    fn rebuild_object_layer(&mut self) {
        self.object_layer.fill(CostCell::FREE);
        // Ascending ids with a strict comparison: highest cost wins, ties keep the lower id.
        for (&id, entry) in &self.objects {
            let cell = CostCell {
                cost: entry.class.move_cost,
                object_id: Some(id),
                source: if entry.class.movable {
                    CellSource::MovableObject
                } else {
                    CellSource::UnmovableObject
                },
            };
            for c in &entry.cells {
                let slot = &mut self.object_layer[self.geometry.linear(*c)];
                if slot.is_free() || cell.cost > slot.cost {
                    *slot = cell;
                }
            }
        }
    }

    fn raw_layer(&self) -> Vec<CostCell> {
        self.static_layer
            .iter()
            .zip(&self.object_layer)
            .map(|(s, o)| if !s.is_free() { *s } else { *o })
            .collect()
    }

    pub fn inflate_and_compose(&mut self) {
        self.inflate_and_compose_with(Exec::default());
    }

    pub fn inflate_and_compose_with(&mut self, exec: Exec) {
        let raw = self.raw_layer();
        let cells = inflate(&raw, &self.geometry, self.inflation_radius, exec);
        self.composed = Arc::new(ComposedGrid::from_cells(self.geometry, cells));
    }

    /// Text sidecar for the PGM dump: one line per object,
    /// `id<TAB>class<TAB>movable|fatal<TAB>col,row col,row ...`.
    pub fn write_object_table(&self, out: &mut impl Write) -> io::Result<()> {
        for (id, e) in &self.objects {
            let cells: Vec<String> = e.cells.iter().map(|c| c.to_string()).collect();
            writeln!(
                out,
                "{id}\t{}\t{}\t{}",
                e.class.name,
                if e.class.movable { "movable" } else { "fatal" },
                cells.join(" ")
            )?;
        }
        Ok(())
    }
}

/// Cell offsets `(dc, dr, squared distance)` within `radius` meters.
fn disc_offsets(radius: f64, resolution: f64) -> Vec<(i64, i64, i64)> {
    let r = radius / resolution;
    let r2 = r * r + 1e-6;
    let n = r.floor() as i64 + 1;
    let mut out = Vec::new();
    for dr in -n..=n {
        for dc in -n..=n {
            let d2 = dc * dc + dr * dr;
            if (d2 as f64) <= r2 {
                out.push((dc, dr, d2));
            }
        }
    }
    out
}

fn inflate(raw: &[CostCell], g: &GridGeometry, radius: f64, exec: Exec) -> Vec<CostCell> {
    let offsets = disc_offsets(radius, g.resolution);
    let (w, h) = (g.width as i64, g.height as i64);
    let mut out = vec![CostCell::FREE; raw.len()];
    if out.is_empty() {
        return out;
    }
    exec.fill_chunks(&mut out, g.width as usize, |row, chunk| {
        let r = row as i64;
        for (c, slot) in chunk.iter_mut().enumerate() {
            let c = c as i64;
            let own = raw[(r * w + c) as usize];
            if own.is_fatal() {
                *slot = own;
                continue;
            }
            let mut fatal_nearby = false;
            let mut max_movable = 0u8;
            let mut nearest: Option<(i64, ObjectId)> = None;
            for &(dc, dr, d2) in &offsets {
                let (sc, sr) = (c + dc, r + dr);
                if sc < 0 || sr < 0 || sc >= w || sr >= h {
                    continue;
                }
                let src = raw[(sr * w + sc) as usize];
                if src.is_free() {
                    continue;
                }
                if src.is_fatal() {
                    fatal_nearby = true;
                    break;
                }
                max_movable = max_movable.max(src.cost);
                if let Some(id) = src.object_id {
                    if nearest.is_none_or(|n| (d2, id) < n) {
                        nearest = Some((d2, id));
                    }
                }
            }
            *slot = if fatal_nearby {
                CostCell {
                    cost: FATAL,
                    object_id: own.object_id,
                    source: CellSource::Inflation,
                }
            } else if !own.is_free() {
                CostCell {
                    cost: own.cost.max(max_movable),
                    ..own
                }
            } else if let Some((_, id)) = nearest {
                CostCell {
                    cost: max_movable,
                    object_id: Some(id),
                    source: CellSource::Inflation,
                }
            } else {
                CostCell::FREE
            };
        }
    });
    out
}
