//! On-disk scenario description and its validation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point2, Pose2D};
use crate::grid::GridGeometry;
use crate::world::{ClassName, ClassTable, ObjectClass, ObjectId, ObjectInstance, RobotParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: u32,
    pub map: MapSpec,
    pub robot: RobotSpec,
    pub goal: GoalSpec,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub sim: SimSpec,
    /// Per-class overrides on top of the default class table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<ObjectClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    /// Convex world-frame polygons, either winding.
    #[serde(default)]
    pub static_polygons: Vec<Vec<Point2>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub start: Pose2D,
    pub radius: f64,
    pub cruise_speed: f64,
    pub push_speed: f64,
    pub max_angular: f64,
    pub wheel_base: f64,
    pub current_idle: f64,
    pub current_per_newton: f64,
    pub current_limit: f64,
}

impl RobotSpec {
    pub fn params(&self) -> RobotParams {
        RobotParams {
            radius: self.radius,
            cruise_speed: self.cruise_speed,
            push_speed: self.push_speed,
            max_angular: self.max_angular,
            wheel_base: self.wheel_base,
            current_idle: self.current_idle,
            current_per_newton: self.current_per_newton,
            current_limit: self.current_limit,
        }
    }

    pub fn with_params(start: Pose2D, p: RobotParams) -> Self {
        Self {
            start,
            radius: p.radius,
            cruise_speed: p.cruise_speed,
            push_speed: p.push_speed,
            max_angular: p.max_angular,
            wheel_base: p.wheel_base,
            current_idle: p.current_idle,
            current_per_newton: p.current_per_newton,
            current_limit: p.current_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub x: f64,
    pub y: f64,
    pub tolerance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub class: ClassName,
    /// Object-frame footprint, counter-clockwise.
    pub footprint: Vec<Point2>,
    pub pose: Pose2D,
    pub mass: f64,
    pub friction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt_s: f64,
    pub max_ticks: u64,
    pub perception_period_ticks: u32,
    /// Reserved; the pipeline draws no random numbers.
    pub seed: u64,
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub geometry: GridGeometry,
    pub statics: Vec<Vec<Point2>>,
    pub objects: Vec<ObjectInstance>,
    pub classes: ClassTable,
    pub robot: RobotParams,
    pub start: Pose2D,
    pub goal: Point2,
    pub goal_tolerance: f64,
    pub sim: SimSpec,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Check every field and build the simulation world. All problems are
    /// reported together, one line per field.
    pub fn validate(&self) -> Result<World, ScenarioError> {
        let mut issues = Vec::new();
        let mut fail = |field: String, msg: &str| issues.push(format!("{field}: {msg}"));

        if self.format != FORMAT_VERSION {
            fail("format".into(), &format!("expected {FORMAT_VERSION}, got {}", self.format));
        }

        let m = &self.map;
        let map_ok = m.width_m > 0.0 && m.height_m > 0.0 && m.resolution > 0.0;
        if !(m.width_m > 0.0 && m.width_m.is_finite()) {
            fail("map.width_m".into(), "must be positive");
        }
        if !(m.height_m > 0.0 && m.height_m.is_finite()) {
            fail("map.height_m".into(), "must be positive");
        }
        if !(m.resolution > 0.0 && m.resolution.is_finite()) {
            fail("map.resolution".into(), "must be positive");
        }
        let inside = |p: Point2| map_ok && p.x >= 0.0 && p.y >= 0.0 && p.x < m.width_m && p.y < m.height_m;

        let mut statics = Vec::new();
        for (i, poly) in m.static_polygons.iter().enumerate() {
            let ccw = geometry::to_ccw(poly);
            if poly.len() < 3 || !geometry::is_convex_ccw(&ccw) {
                fail(format!("map.static_polygons[{i}]"), "must be a convex polygon with at least 3 vertices");
            } else {
                statics.push(ccw);
            }
        }

        let robot = self.robot.params();
        if let Err(e) = robot.validate() {
            fail("robot".into(), &e.to_string());
        }
        let start = Pose2D::new(self.robot.start.x, self.robot.start.y, self.robot.start.theta);
        if !inside(start.position()) {
            fail("robot.start".into(), "outside the map");
        }

        let goal = Point2::new(self.goal.x, self.goal.y);
        if !inside(goal) {
            fail("goal".into(), "outside the map");
        }
        if !(self.goal.tolerance_m > 0.0) {
            fail("goal.tolerance_m".into(), "must be positive");
        }

        let mut classes = ClassTable::default();
        for (i, c) in self.classes.iter().enumerate() {
            if let Err(e) = classes.set(*c) {
                fail(format!("classes[{i}]"), &e.to_string());
            }
        }

        let mut seen = BTreeSet::new();
        let mut objects = Vec::new();
        for (i, o) in self.objects.iter().enumerate() {
            let field = format!("objects[{i}]");
            if !seen.insert(o.id) {
                fail(format!("{field}.id"), &format!("duplicate id {}", o.id));
            }
            let pose = Pose2D::new(o.pose.x, o.pose.y, o.pose.theta);
            match ObjectInstance::new(o.id, classes.get(o.class), o.footprint.clone(), pose, o.mass, o.friction) {
                Ok(obj) => {
                    if !obj.footprint_world().iter().all(|&p| inside(p)) {
                        fail(field, "footprint leaves the map");
                    } else if statics.iter().any(|s| geometry::convex_overlap(s, &obj.footprint_world())) {
                        fail(field, "overlaps static geometry");
                    } else if objects
                        .iter()
                        .any(|q: &ObjectInstance| geometry::convex_overlap(&q.footprint_world(), &obj.footprint_world()))
                    {
                        fail(field, "overlaps another object");
                    } else {
                        objects.push(obj);
                    }
                }
                Err(e) => fail(field, &e.to_string()),
            }
        }
        objects.sort_by_key(|o| o.id);

        if robot.radius > 0.0 {
            let bodies = statics.iter().cloned().chain(objects.iter().map(|o| o.footprint_world()));
            for poly in bodies {
                if geometry::signed_distance(start.position(), &poly) < robot.radius - 1e-9 {
                    fail("robot.start".into(), "robot disc overlaps an obstacle");
                    break;
                }
            }
        }

        let s = &self.sim;
        if !(s.dt_s > 0.0 && s.dt_s.is_finite()) {
            fail("sim.dt_s".into(), "must be positive");
        }
        if s.max_ticks == 0 {
            fail("sim.max_ticks".into(), "must be at least 1");
        }
        if s.perception_period_ticks == 0 {
            fail("sim.perception_period_ticks".into(), "must be at least 1");
        }

        if !issues.is_empty() {
            return Err(ScenarioError::Invalid(issues));
        }
        Ok(World {
            geometry: GridGeometry::covering(m.width_m, m.height_m, m.resolution, Point2::ORIGIN),
            statics,
            objects,
            classes,
            robot,
            start,
            goal,
            goal_tolerance: self.goal.tolerance_m,
            sim: *s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rectangle, translate};

    pub(crate) fn corridor() -> Scenario {
        Scenario {
            format: 1,
            map: MapSpec {
                width_m: 6.0,
                height_m: 1.4,
                resolution: 0.05,
                static_polygons: vec![
                    translate(&rectangle(6.0, 0.1), Point2::new(3.0, 0.05)),
                    translate(&rectangle(6.0, 0.1), Point2::new(3.0, 1.35)),
                ],
            },
            robot: RobotSpec::with_params(Pose2D::new(0.5, 0.7, 0.0), RobotParams::default()),
            goal: GoalSpec {
                x: 5.5,
                y: 0.7,
                tolerance_m: 0.15,
            },
            objects: vec![],
            sim: SimSpec {
                dt_s: 0.05,
                max_ticks: 1000,
                perception_period_ticks: 4,
                seed: 0,
            },
            classes: vec![],
        }
    }

    #[test]
    fn round_trips_through_json() {
        let s = corridor();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        s.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&corridor().to_json()).unwrap();
        v["sim"]["noise"] = 0.1.into();
        assert!(matches!(Scenario::from_json(&v.to_string()), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn every_bad_field_is_listed() {
        let mut s = corridor();
        s.format = 2;
        s.sim.dt_s = 0.0;
        s.goal.x = 9.0;
        s.objects = vec![
            ObjectSpec {
                id: ObjectId(1),
                class: ClassName::BoxCardboard,
                footprint: rectangle(0.4, 0.4),
                pose: Pose2D::new(2.0, 0.7, 0.0),
                mass: 2.0,
                friction: 0.4,
            };
            2
        ];
        let Err(ScenarioError::Invalid(issues)) = s.validate() else {
            panic!("expected validation failure");
        };
        let fields: Vec<&str> = issues.iter().map(|i| i.split(':').next().unwrap()).collect();
        assert_eq!(fields, vec!["format", "goal", "objects[1].id", "objects[1]", "sim.dt_s"]);
    }

    #[test]
    fn fixed_classes_cannot_be_made_movable() {
        let mut s = corridor();
        s.classes = vec![ObjectClass {
            name: ClassName::VaseGlass,
            movable: true,
            move_cost: 5,
        }];
        assert!(s.validate().is_err());
    }
}
