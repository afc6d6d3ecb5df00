//! Pure pursuit with rotate-in-place, and the push state machine.
//!
//! The controller is tick driven. Each tick it reads a [`WorldView`] prepared
//! by the simulation (latest costmap, contacts from the previous physics step,
//! simulated motor current) and returns a velocity command plus the events it
//! raised. Every mode change goes through [`transition`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::ComposedGrid;
use crate::geometry::{Point2, Pose2D};
use crate::planner::{first_blocking_object, PlannedPath};
use crate::world::{ObjectId, ObjectInstance, RobotParams};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("cannot follow an empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Follow,
    Rotate,
    Push,
    ReplanWait,
    Done,
    Stuck,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Follow,
        Mode::Rotate,
        Mode::Push,
        Mode::ReplanWait,
        Mode::Done,
        Mode::Stuck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Follow => "FOLLOW",
            Mode::Rotate => "ROTATE",
            Mode::Push => "PUSH",
            Mode::ReplanWait => "REPLAN_WAIT",
            Mode::Done => "DONE",
            Mode::Stuck => "STUCK",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Mode::Done | Mode::Stuck)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose2D,
    pub v: f64,
    pub omega: f64,
    pub current: f64,
    pub mode: Mode,
}

impl RobotState {
    pub fn at(pose: Pose2D, params: &RobotParams) -> Self {
        Self {
            pose,
            v: 0.0,
            omega: 0.0,
            current: params.current_idle,
            mode: Mode::ReplanWait,
        }
    }
}

/// Everything the controller and the simulation tell each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ControlEvent {
    /// The robot touched the first movable object on its path.
    ContactStarted(ObjectId),
    /// The pushed object is no longer touched.
    ContactLost(ObjectId),
    /// Periodic replan while pushing.
    ReplanRequested,
    /// A new path is available.
    PathUpdated,
    /// A replan while pushing no longer runs through the pushed object.
    PathOpened,
    /// The planner found no path.
    PlanFailed,
    /// Heading error above the threshold; turning on the spot.
    RotateStarted,
    /// Heading back within the threshold.
    RotateFinished,
    CurrentLimitExceeded(ObjectId),
    GoalReached,
    Stuck,
}

impl ControlEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ControlEvent::ContactStarted(_) => "contact_started",
            ControlEvent::ContactLost(_) => "contact_lost",
            ControlEvent::ReplanRequested => "replan_requested",
            ControlEvent::PathUpdated => "path_updated",
            ControlEvent::PathOpened => "path_opened",
            ControlEvent::PlanFailed => "plan_failed",
            ControlEvent::RotateStarted => "rotate_started",
            ControlEvent::RotateFinished => "rotate_finished",
            ControlEvent::CurrentLimitExceeded(_) => "current_limit_exceeded",
            ControlEvent::GoalReached => "goal_reached",
            ControlEvent::Stuck => "stuck",
        }
    }

    pub fn object(&self) -> Option<ObjectId> {
        match self {
            ControlEvent::ContactStarted(id)
            | ControlEvent::ContactLost(id)
            | ControlEvent::CurrentLimitExceeded(id) => Some(*id),
            _ => None,
        }
    }
}

/// The controller state machine. Total over every `(mode, event)` pair.
pub fn transition(mode: Mode, event: &ControlEvent) -> Mode {
    use ControlEvent as E;
    if mode.is_terminal() {
        return mode;
    }
    match event {
        E::GoalReached => Mode::Done,
        E::Stuck => Mode::Stuck,
        E::CurrentLimitExceeded(_) | E::PlanFailed => Mode::ReplanWait,
        E::ContactStarted(_) => Mode::Push,
        E::ContactLost(_) | E::PathOpened => match mode {
            Mode::Push => Mode::Follow,
            m => m,
        },
        E::PathUpdated => match mode {
            Mode::ReplanWait => Mode::Follow,
            m => m,
        },
        E::RotateStarted => match mode {
            Mode::Follow => Mode::Rotate,
            m => m,
        },
        E::RotateFinished => match mode {
            Mode::Rotate => Mode::Follow,
            m => m,
        },
        E::ReplanRequested => mode,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Pure pursuit lookahead distance, meters.
    pub lookahead: f64,
    /// Heading error above which the robot turns in place, radians.
    pub heading_threshold: f64,
    /// Sim time between replans while pushing.
    pub replan_period_s: f64,
    /// Consecutive over-limit ticks before the push is abandoned.
    pub limit_debounce: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.5,
            heading_threshold: 60f64.to_radians(),
            replan_period_s: 1.0,
            limit_debounce: 5,
        }
    }
}

/// Target point for pure pursuit: the first waypoint at arc distance
/// `>= lookahead` past the waypoint nearest the robot, or the last waypoint.
pub fn lookahead_point(path: &PlannedPath, from: Point2, lookahead: f64) -> Result<Point2, ControlError> {
    let start = path.nearest_index(from).ok_or(ControlError::EmptyPath)?;
    let wp = &path.waypoints;
    let mut arc = 0.0;
    for i in start + 1..wp.len() {
        arc += wp[i].distance(wp[i - 1]);
        if arc >= lookahead {
            return Ok(wp[i]);
        }
    }
    Ok(wp[wp.len() - 1])
}

/// Steer toward a target given in the robot frame.
pub fn pursue_local(target: Point2, speed: f64, params: &RobotParams, heading_threshold: f64) -> VelocityCommand {
    let angle = target.y.atan2(target.x);
    if angle.abs() > heading_threshold {
        return VelocityCommand {
            v: 0.0,
            omega: params.max_angular.copysign(angle),
        };
    }
    let l2 = target.norm_squared();
    if l2 == 0.0 {
        return VelocityCommand::STOP;
    }
    let kappa = 2.0 * target.y / l2;
    VelocityCommand {
        v: speed,
        omega: (speed * kappa).clamp(-params.max_angular, params.max_angular),
    }
}

pub fn pure_pursuit_step(
    state: &RobotState,
    path: &PlannedPath,
    params: &RobotParams,
    cfg: &ControllerConfig,
) -> Result<VelocityCommand, ControlError> {
    let target = lookahead_point(path, state.pose.position(), cfg.lookahead)?;
    let local = state.pose.inverse_transform_point(target);
    let speed = if state.mode == Mode::Push {
        params.push_speed
    } else {
        params.cruise_speed
    };
    Ok(pursue_local(local, speed, params, cfg.heading_threshold))
}

/// Sliding friction the robot must overcome to push an object, `μ·m·g`.
pub fn push_required_force(mass: f64, friction_mu: f64) -> f64 {
    friction_mu * mass * GRAVITY
}

pub fn object_push_force(obj: &ObjectInstance) -> f64 {
    push_required_force(obj.mass, obj.friction_mu)
}

/// Linear wheel-current proxy: idle draw plus a term proportional to push force.
pub fn motor_current(push_force: f64, params: &RobotParams) -> f64 {
    params.current_idle + params.current_per_newton * push_force
}

/// What the controller may look at on a given tick.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub grid: &'a ComposedGrid,
    /// Objects touched during the previous physics step.
    pub contacts: &'a BTreeSet<ObjectId>,
    /// Motor current measured during the previous physics step.
    pub current: f64,
    pub goal: Point2,
    pub goal_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub params: RobotParams,
    pub cfg: ControllerConfig,
    pub state: RobotState,
    replan_every: u32,
    since_replan: u32,
    over_limit: u32,
    contact: Option<ObjectId>,
}

impl Controller {
    pub fn new(params: RobotParams, cfg: ControllerConfig, start: Pose2D, dt: f64) -> Self {
        let replan_every = ((cfg.replan_period_s / dt).round() as u32).max(1);
        Self {
            params,
            cfg,
            state: RobotState::at(start, &params),
            replan_every,
            since_replan: 0,
            over_limit: 0,
            contact: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    /// Object currently being pushed, if any.
    pub fn contact(&self) -> Option<ObjectId> {
        self.contact
    }

    /// Over-limit streak length, for logging and tests.
    pub fn over_limit_ticks(&self) -> u32 {
        self.over_limit
    }

    /// Apply an event raised outside the controller (planning outcomes).
    pub fn notify(&mut self, event: &ControlEvent) {
        self.apply(event);
    }

    fn apply(&mut self, event: &ControlEvent) {
        let next = transition(self.state.mode, event);
        if next != Mode::Push {
            self.contact = None;
            self.over_limit = 0;
        }
        if let ControlEvent::ContactStarted(id) = event {
            if next == Mode::Push {
                self.contact = Some(*id);
                self.since_replan = 0;
                self.over_limit = 0;
            }
        }
        self.state.mode = next;
    }

    fn emit(&mut self, events: &mut Vec<ControlEvent>, e: ControlEvent) {
        self.apply(&e);
        events.push(e);
    }

    fn command(&mut self, cmd: VelocityCommand) -> VelocityCommand {
        self.state.v = cmd.v;
        self.state.omega = cmd.omega;
        cmd
    }

    pub fn tick(&mut self, path: Option<&PlannedPath>, view: &WorldView) -> (VelocityCommand, Vec<ControlEvent>) {
        let mut events = Vec::new();
        self.state.current = view.current;
        if self.state.mode.is_terminal() {
            return (self.command(VelocityCommand::STOP), events);
        }
        if self.state.pose.position().distance(view.goal) <= view.goal_tolerance {
            self.emit(&mut events, ControlEvent::GoalReached);
            return (self.command(VelocityCommand::STOP), events);
        }
        let path = match (self.state.mode, path) {
            (Mode::ReplanWait, _) | (_, None) => return (self.command(VelocityCommand::STOP), events),
            (_, Some(p)) if p.is_empty() => return (self.command(VelocityCommand::STOP), events),
            (_, Some(p)) => p,
        };

        if self.state.mode == Mode::Push {
            let id = self.contact.expect("push mode has a contact");
            self.over_limit = if view.current > self.params.current_limit {
                self.over_limit + 1
            } else {
                0
            };
            if self.over_limit >= self.cfg.limit_debounce {
                self.emit(&mut events, ControlEvent::CurrentLimitExceeded(id));
                return (self.command(VelocityCommand::STOP), events);
            }
            if !view.contacts.contains(&id) {
                self.emit(&mut events, ControlEvent::ContactLost(id));
            } else {
                self.since_replan += 1;
                if self.since_replan >= self.replan_every {
                    self.since_replan = 0;
                    self.emit(&mut events, ControlEvent::ReplanRequested);
                }
            }
        } else if let Some((id, _)) = first_blocking_object(view.grid, path, &self.state.pose) {
            if view.contacts.contains(&id) {
                self.emit(&mut events, ControlEvent::ContactStarted(id));
            }
        }

        let cmd = pure_pursuit_step(&self.state, path, &self.params, &self.cfg).expect("non-empty path");
        let turning = cmd.v == 0.0 && cmd.omega != 0.0;
        match (self.state.mode, turning) {
            (Mode::Follow, true) => self.emit(&mut events, ControlEvent::RotateStarted),
            (Mode::Rotate, false) => self.emit(&mut events, ControlEvent::RotateFinished),
            _ => {}
        }
        (self.command(cmd), events)
    }
}
