//! Unicycle kinematics and quasi-static disc–polygon contact.

use std::collections::{BTreeMap, BTreeSet};

use crate::control::VelocityCommand;
use crate::geometry::{self, Point2, Pose2D};
use crate::world::ObjectId;

/// Advance a unicycle by one tick. Translation uses the mid-tick heading,
/// which is second-order accurate for constant `(v, ω)`.
pub fn step_kinematics(pose: &Pose2D, cmd: VelocityCommand, dt: f64) -> Pose2D {
    assert!(dt > 0.0, "dt must be positive");
    let mid = pose.theta + 0.5 * cmd.omega * dt;
    Pose2D::new(
        pose.x + cmd.v * mid.cos() * dt,
        pose.y + cmd.v * mid.sin() * dt,
        pose.theta + cmd.omega * dt,
    )
}

/// How deep a disc at `center` reaches into `poly` (0 when apart or touching).
pub fn penetration(center: Point2, radius: f64, poly: &[Point2]) -> f64 {
    (radius - geometry::signed_distance(center, poly)).max(0.0)
}

/// Outward unit normal of `poly` at the boundary point nearest `center`,
/// and the disc's penetration depth along it.
fn contact_normal(center: Point2, radius: f64, poly: &[Point2]) -> Option<(Point2, f64)> {
    let sd = geometry::signed_distance(center, poly);
    if sd >= radius {
        return None;
    }
    let q = geometry::closest_point_on_boundary(center, poly);
    let d = center - q;
    let len = d.norm();
    let n = if len > 1e-12 {
        // Inside the polygon the boundary point lies outward of the centre.
        let sign = if sd >= 0.0 { 1.0 } else { -1.0 };
        d * (sign / len)
    } else {
        let c = centroid(poly);
        let away = center - c;
        away * (1.0 / away.norm().max(1e-12))
    };
    Some((n, radius - sd))
}

fn centroid(poly: &[Point2]) -> Point2 {
    let s = poly.iter().fold(Point2::ORIGIN, |a, &p| a + p);
    s * (1.0 / poly.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactBody {
    pub id: ObjectId,
    /// World-frame convex footprint.
    pub polygon: Vec<Point2>,
    /// Whether the robot can move it this tick.
    pub pushable: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactOutcome {
    pub pose: Pose2D,
    /// Translation applied to each pushed object.
    pub displacements: BTreeMap<ObjectId, Point2>,
    /// Objects the robot pressed against or is touching.
    pub contacts: BTreeSet<ObjectId>,
    /// Objects the robot pressed against without moving them.
    pub pressed: BTreeSet<ObjectId>,
    /// Pushable objects whose displacement was cancelled by a collision.
    pub blocked: BTreeSet<ObjectId>,
    /// The whole step was undone because no penetration-free pose was found.
    pub reverted: bool,
}

/// Contacts closer than this after resolution still count as touching.
pub const TOUCH_MARGIN: f64 = 1e-3;
const SLOP: f64 = 1e-9;

fn push_out(mut p: Point2, radius: f64, rigid: &[&[Point2]]) -> Point2 {
    for _ in 0..16 {
        let mut moved = false;
        for poly in rigid {
            if let Some((n, depth)) = contact_normal(p, radius, poly) {
                if depth > SLOP {
                    p = p + n * (depth + SLOP);
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    p
}

/// Resolve one robot step against static geometry and objects.
///
/// Rigid bodies (statics and non-pushable objects) push the robot back out
/// along their contact normal. A pushable object the robot runs into is
/// translated out of the disc along the same normal, unless that would make
/// it overlap a wall or another object; it is then flagged blocked and
/// treated as rigid. If the robot still penetrates something after this the
/// step is undone.
pub fn resolve_contacts(
    radius: f64,
    from: &Pose2D,
    proposed: &Pose2D,
    statics: &[Vec<Point2>],
    objects: &[ContactBody],
) -> ContactOutcome {
    let mut blocked = BTreeSet::new();
    let mut displacements = BTreeMap::new();
    let mut p = proposed.position();

    for _round in 0..=objects.len() {
        let rigid: Vec<&[Point2]> = statics
            .iter()
            .map(Vec::as_slice)
            .chain(
                objects
                    .iter()
                    .filter(|o| !o.pushable || blocked.contains(&o.id))
                    .map(|o| o.polygon.as_slice()),
            )
            .collect();
        p = push_out(proposed.position(), radius, &rigid);

        displacements.clear();
        let mut placed: BTreeMap<ObjectId, Vec<Point2>> = BTreeMap::new();
        let mut newly_blocked = false;
        for o in objects.iter().filter(|o| o.pushable && !blocked.contains(&o.id)) {
            let Some((n, depth)) = contact_normal(p, radius, &o.polygon) else {
                continue;
            };
            if depth <= SLOP {
                continue;
            }
            let shift = -n * (depth + SLOP);
            let moved = geometry::translate(&o.polygon, shift);
            let collides = statics.iter().any(|s| geometry::convex_overlap(&moved, s))
                || objects.iter().filter(|q| q.id != o.id).any(|q| {
                    let other = placed.get(&q.id).unwrap_or(&q.polygon);
                    geometry::convex_overlap(&moved, other)
                });
            if collides {
                blocked.insert(o.id);
                newly_blocked = true;
                break;
            }
            displacements.insert(o.id, shift);
            placed.insert(o.id, moved);
        }
        if !newly_blocked {
            break;
        }
    }

    let final_polygon = |o: &ContactBody, displacements: &BTreeMap<ObjectId, Point2>| -> Vec<Point2> {
        match displacements.get(&o.id) {
            Some(d) => geometry::translate(&o.polygon, *d),
            None => o.polygon.clone(),
        }
    };
    let deepest = statics
        .iter()
        .map(|s| penetration(p, radius, s))
        .chain(objects.iter().map(|o| penetration(p, radius, &final_polygon(o, &displacements))))
        .fold(0.0, f64::max);
    let reverted = deepest > 1e-7;
    if reverted {
        p = from.position();
        displacements.clear();
    }

    let start = proposed.position();
    let mut contacts = BTreeSet::new();
    let mut pressed = BTreeSet::new();
    for o in objects {
        let hit_proposed = penetration(start, radius, &o.polygon) > SLOP;
        let touching = geometry::signed_distance(p, &final_polygon(o, &displacements)) <= radius + TOUCH_MARGIN;
        if hit_proposed || touching {
            contacts.insert(o.id);
        }
        if hit_proposed && !displacements.contains_key(&o.id) {
            pressed.insert(o.id);
        }
    }

    ContactOutcome {
        pose: Pose2D::new(p.x, p.y, proposed.theta),
        displacements,
        contacts,
        pressed,
        blocked,
        reverted,
    }
}
