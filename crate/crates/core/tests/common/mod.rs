//! Test oracles shared by several integration test targets.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use namo_core::{CellSource, ComposedGrid, CostCell, GridGeometry, GridIndex, ObjectId, FATAL};
use rand::Rng;

/// Cost `a + b·√2` with non-negative integers, compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Surd {
    pub a: i64,
    pub b: i64,
}

impl Ord for Surd {
    fn cmp(&self, o: &Self) -> Ordering {
        let p = (self.a - o.a) as i128;
        let q = (self.b - o.b) as i128;
        // sign of p + q·√2
        match (p.signum(), q.signum()) {
            (0, 0) => Ordering::Equal,
            (ps, qs) if ps >= 0 && qs >= 0 => Ordering::Greater,
            (ps, qs) if ps <= 0 && qs <= 0 => Ordering::Less,
            (1, _) => (p * p).cmp(&(2 * q * q)),
            _ => (2 * q * q).cmp(&(p * p)),
        }
    }
}
impl PartialOrd for Surd {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Plain Dijkstra over the same move rules, exact arithmetic.
pub fn dijkstra(cost: &[Option<u8>], w: i64, h: i64, s: (i64, i64), t: (i64, i64)) -> Option<Surd> {
    let at = |c: i64, r: i64| cost[(r * w + c) as usize];
    let mut best: Vec<Option<Surd>> = vec![None; cost.len()];
    let mut heap = BinaryHeap::new();
    best[(s.1 * w + s.0) as usize] = Some(Surd { a: 0, b: 0 });
    heap.push(std::cmp::Reverse((Surd { a: 0, b: 0 }, s)));
    while let Some(std::cmp::Reverse((d, (c, r)))) = heap.pop() {
        if best[(r * w + c) as usize] != Some(d) {
            continue;
        }
        if (c, r) == t {
            return Some(d);
        }
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (nc, nr) = (c + dc, r + dr);
                if (dc, dr) == (0, 0) || nc < 0 || nr < 0 || nc >= w || nr >= h {
                    continue;
                }
                let Some(extra) = at(nc, nr) else { continue };
                let diagonal = dc != 0 && dr != 0;
                if diagonal && at(nc, r).is_none() && at(c, nr).is_none() {
                    continue;
                }
                let nd = if diagonal {
                    Surd { a: d.a + extra as i64, b: d.b + 1 }
                } else {
                    Surd { a: d.a + 1 + extra as i64, b: d.b }
                };
                let slot = &mut best[(nr * w + nc) as usize];
                if slot.is_none_or(|old| nd < old) {
                    *slot = Some(nd);
                    heap.push(std::cmp::Reverse((nd, (nc, nr))));
                }
            }
        }
    }
    None
}

pub fn surd_of_path(grid: &ComposedGrid, cells: &[GridIndex]) -> Surd {
    let mut s = Surd { a: 0, b: 0 };
    for w in cells.windows(2) {
        let extra = grid.get(w[1]).cost as i64;
        if w[0].col != w[1].col && w[0].row != w[1].row {
            s.b += 1;
        } else {
            s.a += 1;
        }
        s.a += extra;
    }
    s
}

/// Random map: roughly 20% fatal, 30% movable cost, the rest free.
/// `None` marks a fatal cell, `Some(extra)` a traversable one.
pub fn random_costs(rng: &mut impl Rng, n: usize) -> Vec<Option<u8>> {
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=1 => None,
            2..=4 => Some(rng.random_range(1..FATAL)),
            _ => Some(0),
        })
        .collect()
}

pub fn grid_from_costs(geom: GridGeometry, raw: &[Option<u8>]) -> ComposedGrid {
    let cells = raw
        .iter()
        .map(|c| match c {
            None => CostCell {
                cost: FATAL,
                object_id: None,
                source: CellSource::Static,
            },
            Some(0) => CostCell::FREE,
            Some(v) => CostCell {
                cost: *v,
                object_id: Some(ObjectId(1)),
                source: CellSource::MovableObject,
            },
        })
        .collect();
    ComposedGrid::from_cells(geom, cells)
}

pub fn surd_value(s: Surd) -> f64 {
    s.a as f64 + s.b as f64 * std::f64::consts::SQRT_2
}

pub fn index_pair(i: GridIndex) -> (i64, i64) {
    (i.col as i64, i.row as i64)
}
