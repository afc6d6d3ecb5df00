//! Semantic world primitives: object classes, obstacle instances and robot
//! parameters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point2, Pose2D};

/// Cost value marking a cell the robot must never enter.
pub const FATAL: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassName {
    BoxCardboard,
    TrashCan,
    FoodTrolley,
    VaseGlass,
    Unknown,
}

impl ClassName {
    pub const ALL: [ClassName; 5] = [
        ClassName::BoxCardboard,
        ClassName::TrashCan,
        ClassName::FoodTrolley,
        ClassName::VaseGlass,
        ClassName::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassName::BoxCardboard => "box_cardboard",
            ClassName::TrashCan => "trash_can",
            ClassName::FoodTrolley => "food_trolley",
            ClassName::VaseGlass => "vase_glass",
            ClassName::Unknown => "unknown",
        }
    }

    /// Classes that may never be pushed regardless of configuration.
    pub fn always_fatal(self) -> bool {
        matches!(self, ClassName::VaseGlass | ClassName::Unknown)
    }
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("class {0} cannot be movable")]
    FixedClassMovable(ClassName),
    #[error("movable class {class} needs a move cost in 1..=254, got {cost}")]
    BadMoveCost { class: ClassName, cost: u8 },
    #[error("object {id}: {reason}")]
    BadObject { id: ObjectId, reason: String },
    #[error("robot parameters: {0}")]
    BadRobot(String),
}

/// Per-class semantics: whether the robot may push it and what each
/// traversed cell costs when it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectClass {
    pub name: ClassName,
    pub movable: bool,
    pub move_cost: u8,
}

impl ObjectClass {
    pub fn movable(name: ClassName, move_cost: u8) -> Result<Self, WorldError> {
        if name.always_fatal() {
            return Err(WorldError::FixedClassMovable(name));
        }
        if move_cost == 0 || move_cost == FATAL {
            return Err(WorldError::BadMoveCost {
                class: name,
                cost: move_cost,
            });
        }
        Ok(Self {
            name,
            movable: true,
            move_cost,
        })
    }

    pub fn unmovable(name: ClassName) -> Self {
        Self {
            name,
            movable: false,
            move_cost: FATAL,
        }
    }

    /// The same class with pushing disabled.
    pub fn as_unmovable(self) -> Self {
        Self::unmovable(self.name)
    }
}

/// Class lookup table. Defaults: boxes 10, trash cans 25, trolleys 40 per
/// cell; glass vases and unknown obstacles are fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    classes: BTreeMap<ClassName, ObjectClass>,
}

impl Default for ClassTable {
    fn default() -> Self {
        let classes = [
            ObjectClass::movable(ClassName::BoxCardboard, 10),
            ObjectClass::movable(ClassName::TrashCan, 25),
            ObjectClass::movable(ClassName::FoodTrolley, 40),
        ]
        .into_iter()
        .map(|c| c.expect("default class table is valid"))
        .chain([
            ObjectClass::unmovable(ClassName::VaseGlass),
            ObjectClass::unmovable(ClassName::Unknown),
        ])
        .map(|c| (c.name, c))
        .collect();
        Self { classes }
    }
}

impl ClassTable {
    pub fn get(&self, name: ClassName) -> ObjectClass {
        self.classes[&name]
    }

    /// Override a single class entry, checking the class invariants.
    pub fn set(&mut self, class: ObjectClass) -> Result<(), WorldError> {
        if class.movable {
            ObjectClass::movable(class.name, class.move_cost)?;
        } else if class.move_cost != FATAL {
            return Err(WorldError::BadMoveCost {
                class: class.name,
                cost: class.move_cost,
            });
        }
        self.classes.insert(class.name, class);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectClass> {
        self.classes.values()
    }
}

/// A rigid obstacle in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub class: ObjectClass,
    /// Convex, counter-clockwise, in the object frame.
    pub footprint: Vec<Point2>,
    pub pose: Pose2D,
    pub mass: f64,
    pub friction_mu: f64,
}

impl ObjectInstance {
    pub fn new(
        id: ObjectId,
        class: ObjectClass,
        footprint: Vec<Point2>,
        pose: Pose2D,
        mass: f64,
        friction_mu: f64,
    ) -> Result<Self, WorldError> {
        let bad = |reason: &str| WorldError::BadObject {
            id,
            reason: reason.to_string(),
        };
        if footprint.len() < 3 {
            return Err(bad("footprint needs at least 3 vertices"));
        }
        if !geometry::is_convex_ccw(&footprint) {
            return Err(bad("footprint must be convex and counter-clockwise"));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(bad("mass must be positive"));
        }
        if !(friction_mu > 0.0 && friction_mu <= 2.0) {
            return Err(bad("friction must lie in (0, 2]"));
        }
        Ok(Self {
            id,
            class,
            footprint,
            pose,
            mass,
            friction_mu,
        })
    }

    /// Footprint vertices in the world frame.
    pub fn footprint_world(&self) -> Vec<Point2> {
        geometry::transform(&self.footprint, &self.pose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub radius: f64,
    pub cruise_speed: f64,
    pub push_speed: f64,
    pub max_angular: f64,
    pub wheel_base: f64,
    pub current_idle: f64,
    pub current_per_newton: f64,
    pub current_limit: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            radius: 0.2,
            cruise_speed: 0.3,
            push_speed: 0.1,
            max_angular: 1.0,
            wheel_base: 0.3,
            current_idle: 0.5,
            current_per_newton: 0.5,
            current_limit: 5.0,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let fail = |m: &str| Err(WorldError::BadRobot(m.to_string()));
        if !(self.radius > 0.0) {
            return fail("radius must be positive");
        }
        if !(self.cruise_speed > 0.0) {
            return fail("cruise_speed must be positive");
        }
        if !(self.push_speed > 0.0 && self.push_speed <= self.cruise_speed) {
            return fail("push_speed must lie in (0, cruise_speed]");
        }
        if !(self.max_angular > 0.0) {
            return fail("max_angular must be positive");
        }
        if !(self.wheel_base > 0.0) {
            return fail("wheel_base must be positive");
        }
        if !(self.current_idle >= 0.0 && self.current_per_newton >= 0.0) {
            return fail("currents must be non-negative");
        }
        if !(self.current_limit > self.current_idle) {
            return fail("current_limit must exceed current_idle");
        }
        Ok(())
    }
}
