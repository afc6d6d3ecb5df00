//! Navigation among movable obstacles: a deterministic 2D simulator and the
//! planning stack it exercises.
//!
//! A differential-drive robot perceives labelled obstacles through a
//! synthetic depth camera ([`perception`]), keeps a layered costmap
//! ([`costmap`]), plans over movability costs with A* ([`planner`]), follows
//! the plan with pure pursuit and pushes movable obstacles until a motor
//! current limit trips ([`control`]). [`sim`] ties the loop together and
//! loads scenario files.

pub mod control;
pub mod costmap;
pub mod exec;
pub mod geometry;
pub mod grid;
pub mod perception;
pub mod planner;
pub mod sim;
pub mod world;

pub use costmap::{CellSource, ComposedGrid, CostCell, LayeredCostmap};
pub use exec::Exec;
pub use geometry::{Point2, Pose2D};
pub use grid::{GridGeometry, GridIndex};
pub use planner::{plan_astar, PlannedPath};
pub use world::{ClassName, ClassTable, ObjectClass, ObjectId, ObjectInstance, RobotParams, FATAL};
pub use sim::{run_scenario, RunOptions, Scenario, SimulationReport};
