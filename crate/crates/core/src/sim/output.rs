//! Trajectory CSV, JSON report and SVG frames.

use std::fmt::Write as _;

use crate::control::Mode;
use crate::costmap::{CellSource, LayeredCostmap};
use crate::geometry::{Point2, Pose2D};
use crate::planner::PlannedPath;
use crate::world::{ObjectId, FATAL};

use super::{SimulationReport, World};

pub const CSV_HEADER: &str = "tick,t,x,y,theta,v,omega,mode,current,event,object_id";

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub mode: Mode,
    pub current: f64,
    /// `;`-joined event names, empty when nothing happened.
    pub event: String,
    pub object_id: Option<ObjectId>,
}

/// Floats use Rust's shortest round-trip formatting, so the text is exact
/// and identical across runs.
pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let id = r.object_id.map(|i| i.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.tick, r.t, r.x, r.y, r.theta, r.v, r.omega, r.mode, r.current, r.event, id
        )
        .expect("writing to a String");
    }
    s
}

pub fn report_json(report: &SimulationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

const PX_PER_M: f64 = 100.0;

/// Top-down frame: costmap heat underneath, then walls, objects, path, robot
/// and goal. World y points up in the picture.
pub fn render_svg(world: &World, costmap: &LayeredCostmap, path: Option<&PlannedPath>, robot: &Pose2D) -> String {
    let g = &world.geometry;
    let w = g.width as f64 * g.resolution;
    let h = g.height as f64 * g.resolution;
    let px = |p: Point2| ((p.x - g.origin.x) * PX_PER_M, (h - (p.y - g.origin.y)) * PX_PER_M);
    let points = |poly: &[Point2]| {
        poly.iter()
            .map(|&p| {
                let (x, y) = px(p);
                format!("{x:.1},{y:.1}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        w * PX_PER_M,
        h * PX_PER_M,
        w * PX_PER_M,
        h * PX_PER_M
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    let cell = g.resolution * PX_PER_M;
    for (i, c) in costmap.composed().cells().iter().enumerate() {
        if c.is_free() {
            continue;
        }
        let idx = g.index_of(i);
        let corner = Point2::new(
            g.origin.x + idx.col as f64 * g.resolution,
            g.origin.y + (idx.row + 1) as f64 * g.resolution,
        );
        let (x, y) = px(corner);
        let (fill, opacity) = match (c.source, c.cost) {
            (CellSource::Static, _) => ("#444444", 0.9),
            (_, FATAL) => ("#c0392b", 0.35),
            (_, cost) => ("#e67e22", 0.15 + 0.6 * cost as f64 / 254.0),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{fill}" fill-opacity="{opacity:.2}"/>"#
        );
    }

    for poly in &world.statics {
        let _ = writeln!(s, r##"<polygon points="{}" fill="#222222"/>"##, points(poly));
    }
    for o in &world.objects {
        let fill = if o.class.movable { "#d4a55a" } else { "#7f8c8d" };
        let fp = o.footprint_world();
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="{fill}" stroke="#333333" stroke-width="1"/>"##,
            points(&fp)
        );
        let c = fp.iter().fold(Point2::ORIGIN, |a, &p| a + p) * (1.0 / fp.len() as f64);
        let (x, y) = px(c);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            o.id
        );
    }
    if let Some(p) = path {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#2980b9" stroke-width="2"/>"##,
            points(&p.waypoints)
        );
    }

    let (gx, gy) = px(world.goal);
    let _ = writeln!(
        s,
        r##"<circle cx="{gx:.1}" cy="{gy:.1}" r="{:.1}" fill="#e74c3c"/>"##,
        0.06 * PX_PER_M
    );
    let (rx, ry) = px(robot.position());
    let nose = robot.transform_point(Point2::new(world.robot.radius, 0.0));
    let (nx, ny) = px(nose);
    let _ = writeln!(
        s,
        r##"<circle cx="{rx:.1}" cy="{ry:.1}" r="{:.1}" fill="#27ae60" fill-opacity="0.7" stroke="#145a32"/>"##,
        world.robot.radius * PX_PER_M
    );
    let _ = writeln!(
        s,
        r##"<line x1="{rx:.1}" y1="{ry:.1}" x2="{nx:.1}" y2="{ny:.1}" stroke="#145a32" stroke-width="2"/>"##
    );
    s.push_str("</svg>\n");
    s
}
