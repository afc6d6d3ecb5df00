//! Deterministic tick loop: perception → costmap → planning → control →
//! contacts → log.

pub mod output;
pub mod physics;
pub mod scenario;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::control::{
    motor_current, object_push_force, ControlEvent, Controller, ControllerConfig, Mode, WorldView,
};
use crate::costmap::{CellSource, ComposedGrid, LayeredCostmap};
use crate::exec::Exec;
use crate::geometry::{self, Point2, Pose2D};
use crate::grid::GridIndex;
use crate::perception::render::{Prism, OBJECT_HEIGHT, WALL_HEIGHT};
use crate::perception::{perception_tick, CameraConfig, CellProjection, SorParams};
use crate::planner::{first_blocking_object, plan_cells, PlanError, PlannedPath, PlannerConfig};
use crate::world::ObjectId;

pub use output::{TrajectoryRow, CSV_HEADER};
pub use physics::{resolve_contacts, step_kinematics, ContactBody, ContactOutcome};
pub use scenario::{Scenario, ScenarioError, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerceptionMode {
    /// Synthetic depth and mask through the full point-cloud chain.
    #[default]
    Rendered,
    /// Every object footprint rasterized directly, regardless of view.
    Oracle,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub perception: PerceptionMode,
    pub camera: CameraConfig,
    pub controller: ControllerConfig,
    pub planner: PlannerConfig,
    /// SOR neighbour count and threshold multiplier.
    pub sor: SorParams,
    /// Consecutive plan failures before giving up.
    pub max_plan_failures: u32,
    /// Ticks without getting 1 cm closer to the goal before giving up.
    pub watchdog_ticks: u64,
    pub max_ticks: Option<u64>,
    /// Emit an SVG frame every this many ticks.
    pub svg_every: Option<u64>,
    pub exec: Exec,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            perception: PerceptionMode::Rendered,
            camera: CameraConfig::default(),
            controller: ControllerConfig::default(),
            planner: PlannerConfig::default(),
            sor: SorParams::default(),
            max_plan_failures: 3,
            watchdog_ticks: 600,
            max_ticks: None,
            svg_every: None,
            exec: Exec::default(),
        }
    }
}

/// Extra clearance added to the robot radius when inflating.
pub const INFLATION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushRecord {
    pub object_id: ObjectId,
    pub push_distance_m: f64,
    pub max_current_a: f64,
    pub limit_tripped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub success: bool,
    pub ticks: u64,
    pub sim_time_s: f64,
    pub path_length_m: f64,
    pub replans: u32,
    pub pushes: Vec<PushRecord>,
    pub final_pose: Pose2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GoalReached,
    Stuck,
    MaxTicks,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SimulationReport,
    pub stop: StopReason,
    pub rows: Vec<TrajectoryRow>,
    /// `(tick, svg)` pairs when frames were requested.
    pub frames: Vec<(u64, String)>,
    /// Ticks on which the robot overlapped a wall or unmovable object by more than 1 µm.
    pub safety_violations: u32,
    /// Deepest overlap of the robot with any obstacle over the run.
    pub max_penetration_m: f64,
    pub costmap: LayeredCostmap,
    pub world: World,
}

impl RunOutput {
    pub fn trajectory_csv(&self) -> String {
        output::trajectory_csv(&self.rows)
    }

    pub fn report_json(&self) -> String {
        output::report_json(&self.report)
    }
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, ScenarioError> {
    let world = scenario.validate()?;
    Ok(Simulation::new(world, opts.clone()).run())
}

#[derive(Debug, Clone, Default)]
struct PushTally {
    first_tick: u64,
    max_current: f64,
    tripped: bool,
}

struct Simulation {
    world: World,
    opts: RunOptions,
    costmap: LayeredCostmap,
    ctl: Controller,
    path: Option<PlannedPath>,
    /// Composed costs along `path` when it was planned.
    path_costs: Vec<u8>,
    need_plan: bool,
    planned_once: bool,
    replans: u32,
    plan_failures: u32,
    tripped: BTreeSet<ObjectId>,
    contacts: BTreeSet<ObjectId>,
    current: f64,
    moved: BTreeMap<ObjectId, f64>,
    pushes: BTreeMap<ObjectId, PushTally>,
    rows: Vec<TrajectoryRow>,
    frames: Vec<(u64, String)>,
    safety_violations: u32,
    max_penetration: f64,
    best_goal_distance: f64,
    last_progress: u64,
}

impl Simulation {
    fn new(world: World, opts: RunOptions) -> Self {
        let params = world.robot;
        let mut costmap = LayeredCostmap::new(world.geometry, params.radius + INFLATION_MARGIN);
        let static_cells: BTreeSet<GridIndex> = world
            .statics
            .iter()
            .flat_map(|p| world.geometry.rasterize_polygon(p))
            .collect();
        costmap.set_static(&static_cells).expect("rasterized cells lie inside the grid");
        costmap.inflate_and_compose_with(opts.exec);
        let ctl = Controller::new(params, opts.controller, world.start, world.sim.dt_s);
        Self {
            costmap,
            ctl,
            path: None,
            path_costs: Vec::new(),
            need_plan: true,
            planned_once: false,
            replans: 0,
            plan_failures: 0,
            tripped: BTreeSet::new(),
            contacts: BTreeSet::new(),
            current: params.current_idle,
            moved: BTreeMap::new(),
            pushes: BTreeMap::new(),
            rows: Vec::new(),
            frames: Vec::new(),
            safety_violations: 0,
            max_penetration: 0.0,
            best_goal_distance: world.start.position().distance(world.goal),
            last_progress: 0,
            world,
            opts,
        }
    }

    fn pose(&self) -> Pose2D {
        self.ctl.state.pose
    }

    fn run(mut self) -> RunOutput {
        let max_ticks = self.opts.max_ticks.unwrap_or(self.world.sim.max_ticks);
        let period = self.world.sim.perception_period_ticks as u64;
        let mut tick = 0;
        let stop = loop {
            let mut events = Vec::new();
            if tick == max_ticks {
                self.log(tick, &events, true);
                break StopReason::MaxTicks;
            }
            if tick % period == 0 {
                self.refresh_costmap();
                if self.path_invalidated() {
                    self.need_plan = true;
                }
                if self.ctl.mode() == Mode::ReplanWait && self.path.is_none() {
                    self.need_plan = true;
                }
            }
            if self.need_plan {
                self.plan(&mut events);
            }
            if self.ctl.mode() != Mode::Stuck {
                let grid = self.costmap.snapshot();
                let view = WorldView {
                    grid: &grid,
                    contacts: &self.contacts,
                    current: self.current,
                    goal: self.world.goal,
                    goal_tolerance: self.world.goal_tolerance,
                };
                let (cmd, raised) = self.ctl.tick(self.path.as_ref(), &view);
                for e in &raised {
                    match e {
                        ControlEvent::CurrentLimitExceeded(id) => {
                            self.tripped.insert(*id);
                            self.pushes.entry(*id).or_insert_with(|| PushTally {
                                first_tick: tick,
                                ..Default::default()
                            });
                            self.pushes.get_mut(id).expect("tally exists").tripped = true;
                            if self.costmap.mark_object_unmovable(*id).is_ok() {
                                self.costmap.inflate_and_compose_with(self.opts.exec);
                            }
                            self.need_plan = true;
                        }
                        ControlEvent::ReplanRequested => self.need_plan = true,
                        _ => {}
                    }
                }
                events.extend(raised);
                self.ctl.state.v = cmd.v;
                self.ctl.state.omega = cmd.omega;
            }
            if !self.ctl.mode().is_terminal() && tick.saturating_sub(self.last_progress) >= self.opts.watchdog_ticks {
                self.emit(&mut events, ControlEvent::Stuck);
            }

            if let Some(every) = self.opts.svg_every {
                if every > 0 && tick % every == 0 {
                    let svg = output::render_svg(&self.world, &self.costmap, self.path.as_ref(), &self.pose());
                    self.frames.push((tick, svg));
                }
            }

            match self.ctl.mode() {
                Mode::Done => {
                    self.log(tick, &events, true);
                    break StopReason::GoalReached;
                }
                Mode::Stuck => {
                    self.log(tick, &events, true);
                    break StopReason::Stuck;
                }
                _ => {}
            }
            self.log(tick, &events, false);
            self.physics_step(tick);
            tick += 1;
        };
        self.finish(tick, stop)
    }

    fn emit(&mut self, events: &mut Vec<ControlEvent>, e: ControlEvent) {
        self.ctl.notify(&e);
        events.push(e);
    }

    fn log(&mut self, tick: u64, events: &[ControlEvent], last: bool) {
        let s = &self.ctl.state;
        let (v, omega) = if last { (0.0, 0.0) } else { (s.v, s.omega) };
        let object = events
            .iter()
            .find_map(ControlEvent::object)
            .or(if s.mode == Mode::Push { self.ctl.contact() } else { None });
        let mut names: Vec<&str> = events.iter().map(ControlEvent::name).collect();
        if last && s.mode != Mode::Done && s.mode != Mode::Stuck {
            names.push("max_ticks");
        }
        self.rows.push(TrajectoryRow {
            tick,
            t: tick as f64 * self.world.sim.dt_s,
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
            v,
            omega,
            mode: s.mode,
            current: self.current,
            event: names.join(";"),
            object_id: object,
        });
    }

    fn perceive(&self) -> BTreeMap<ObjectId, BTreeSet<GridIndex>> {
        let geom = &self.world.geometry;
        let mut out: BTreeMap<ObjectId, BTreeSet<GridIndex>> = BTreeMap::new();
        match self.opts.perception {
            PerceptionMode::Oracle => {
                for o in &self.world.objects {
                    out.insert(o.id, geom.rasterize_polygon(&o.footprint_world()).into_iter().collect());
                }
            }
            PerceptionMode::Rendered => {
                let prisms: Vec<Prism> = self
                    .world
                    .statics
                    .iter()
                    .map(|s| Prism::new(None, s.clone(), WALL_HEIGHT))
                    .chain(
                        self.world
                            .objects
                            .iter()
                            .map(|o| Prism::new(Some(o.id), o.footprint_world(), OBJECT_HEIGHT)),
                    )
                    .collect();
                let proj = CellProjection::new(geom.resolution, geom.origin);
                for (cell, id) in perception_tick(&prisms, &self.opts.camera, &self.pose(), &proj, self.opts.sor, self.opts.exec) {
                    if geom.contains(cell) {
                        out.entry(id).or_default().insert(cell);
                    }
                }
            }
        }
        out
    }

    /// Update object layers from a fresh observation. Objects out of view
    /// keep the cells they were last seen at.
    fn refresh_costmap(&mut self) {
        for (id, cells) in self.perceive() {
            let obj = self
                .world
                .objects
                .iter()
                .find(|o| o.id == id)
                .expect("perceived ids come from the world");
            self.costmap
                .upsert_object(id, obj.class, &cells)
                .expect("cells were filtered to the grid");
        }
        self.costmap.inflate_and_compose_with(self.opts.exec);
    }

    fn path_invalidated(&self) -> bool {
        let Some(path) = &self.path else {
            return false;
        };
        let grid = self.costmap.composed();
        let from = path.nearest_index(self.pose().position()).unwrap_or(0);
        let strict = matches!(self.ctl.mode(), Mode::Follow | Mode::Rotate);
        path.cells.iter().zip(&self.path_costs).skip(from + 1).any(|(c, &planned)| {
            let now = grid.get(*c).cost;
            now == crate::world::FATAL || (strict && now != planned)
        })
    }

    fn plan(&mut self, events: &mut Vec<ControlEvent>) {
        self.need_plan = false;
        if self.planned_once {
            self.replans += 1;
        }
        self.planned_once = true;
        let grid = self.costmap.snapshot();
        let pose = self.pose();
        let reach = self.costmap.inflation_radius() + self.world.geometry.resolution;
        match plan_with_escape(&grid, pose.position(), self.world.goal, reach, &self.opts.planner) {
            Ok(path) => {
                self.plan_failures = 0;
                let event = if self.ctl.mode() == Mode::Push {
                    let blocking = first_blocking_object(&grid, &path, &pose).map(|(id, _)| id);
                    (blocking != self.ctl.contact()).then_some(ControlEvent::PathOpened)
                } else {
                    Some(ControlEvent::PathUpdated)
                };
                self.path_costs = path.cells.iter().map(|c| grid.get(*c).cost).collect();
                self.path = Some(path);
                if let Some(e) = event {
                    self.emit(events, e);
                }
            }
            Err(_) => {
                self.plan_failures += 1;
                self.path = None;
                self.path_costs.clear();
                self.emit(events, ControlEvent::PlanFailed);
                if self.plan_failures >= self.opts.max_plan_failures {
                    self.emit(events, ControlEvent::Stuck);
                }
            }
        }
    }

    fn physics_step(&mut self, tick: u64) {
        let params = self.world.robot;
        let from = self.pose();
        let cmd = crate::control::VelocityCommand {
            v: self.ctl.state.v,
            omega: self.ctl.state.omega,
        };
        let proposed = step_kinematics(&from, cmd, self.world.sim.dt_s);
        let bodies: Vec<ContactBody> = self
            .world
            .objects
            .iter()
            .map(|o| ContactBody {
                id: o.id,
                polygon: o.footprint_world(),
                pushable: o.class.movable
                    && !self.tripped.contains(&o.id)
                    && motor_current(object_push_force(o), &params) <= params.current_limit,
            })
            .collect();
        let out = resolve_contacts(params.radius, &from, &proposed, &self.world.statics, &bodies);

        let mut force = 0.0;
        let mut stalled = false;
        for o in &mut self.world.objects {
            if let Some(d) = out.displacements.get(&o.id) {
                o.pose = Pose2D::new(o.pose.x + d.x, o.pose.y + d.y, o.pose.theta);
                *self.moved.entry(o.id).or_default() += d.norm();
                force += object_push_force(o);
            } else if out.pressed.contains(&o.id) && o.class.movable && !self.tripped.contains(&o.id) {
                if out.blocked.contains(&o.id) {
                    stalled = true;
                } else {
                    force += object_push_force(o);
                }
            }
        }
        // A wedged object cannot slide, so the wheels stall well past the limit.
        self.current = if stalled {
            2.0 * params.current_limit
        } else {
            motor_current(force, &params)
        };
        self.contacts = out.contacts;
        self.ctl.state.pose = out.pose;

        if self.ctl.mode() == Mode::Push {
            if let Some(id) = self.ctl.contact().filter(|id| self.contacts.contains(id)) {
                let tally = self.pushes.entry(id).or_insert_with(|| PushTally {
                    first_tick: tick,
                    ..Default::default()
                });
                tally.max_current = tally.max_current.max(self.current);
            }
        }

        let p = out.pose.position();
        let mut worst_rigid: f64 = 0.0;
        let mut worst_any: f64 = 0.0;
        for s in &self.world.statics {
            worst_rigid = worst_rigid.max(physics::penetration(p, params.radius, s));
        }
        for o in &self.world.objects {
            let d = physics::penetration(p, params.radius, &o.footprint_world());
            worst_any = worst_any.max(d);
            if !o.class.movable || self.tripped.contains(&o.id) {
                worst_rigid = worst_rigid.max(d);
            }
        }
        if worst_rigid > 1e-6 {
            self.safety_violations += 1;
        }
        self.max_penetration = self.max_penetration.max(worst_rigid).max(worst_any);

        let d = p.distance(self.world.goal);
        if d < self.best_goal_distance - 0.01 {
            self.best_goal_distance = d;
            self.last_progress = tick + 1;
        }
    }

    fn finish(self, ticks: u64, stop: StopReason) -> RunOutput {
        let path_length_m = self
            .rows
            .windows(2)
            .map(|w| Point2::new(w[0].x, w[0].y).distance(Point2::new(w[1].x, w[1].y)))
            .sum();
        let mut order: Vec<(&ObjectId, &PushTally)> = self.pushes.iter().collect();
        order.sort_by_key(|(id, t)| (t.first_tick, **id));
        let pushes = order
            .into_iter()
            .map(|(id, t)| PushRecord {
                object_id: *id,
                push_distance_m: self.moved.get(id).copied().unwrap_or(0.0),
                max_current_a: t.max_current,
                limit_tripped: t.tripped,
            })
            .collect();
        let report = SimulationReport {
            success: stop == StopReason::GoalReached,
            ticks,
            sim_time_s: ticks as f64 * self.world.sim.dt_s,
            path_length_m,
            replans: self.replans,
            pushes,
            final_pose: self.pose(),
        };
        RunOutput {
            report,
            stop,
            rows: self.rows,
            frames: self.frames,
            safety_violations: self.safety_violations,
            max_penetration_m: self.max_penetration,
            costmap: self.costmap,
            world: self.world,
        }
    }
}

/// Plan from `start` to `goal`. When the start cell lies in fatal inflation
/// (the robot was pressed against something that just became fatal), first
/// walk breadth-first through fatal inflation to the nearest traversable
/// cell and plan from there. Obstacle cells are never crossed, and the walk
/// stays within `reach` meters of the start.
pub fn plan_with_escape(
    grid: &ComposedGrid,
    start: Point2,
    goal: Point2,
    reach: f64,
    cfg: &PlannerConfig,
) -> Result<PlannedPath, PlanError> {
    let g = grid.geometry();
    let oob = |which, p: Point2| PlanError::OutOfBounds { which, x: p.x, y: p.y };
    let s = g.world_to_cell(start).ok_or_else(|| oob("start", start))?;
    let t = g.world_to_cell(goal).ok_or_else(|| oob("goal", goal))?;
    match plan_cells(grid, s, t, cfg) {
        Err(PlanError::StartBlocked) => {}
        other => return other.map(|(p, _)| p),
    }
    for escape in escape_routes(grid, s, reach).take(MAX_ESCAPE_EXITS) {
        let exit = *escape.last().expect("escape route is non-empty");
        if let Ok((rest, _)) = plan_cells(grid, exit, t, cfg) {
            let mut cells = escape;
            cells.extend_from_slice(&rest.cells[1..]);
            return PlannedPath::from_cells(grid, cells, cfg);
        }
    }
    Err(PlanError::StartBlocked)
}

const MAX_ESCAPE_EXITS: usize = 64;

/// Routes from `start` to traversable cells, nearest first.
fn escape_routes(grid: &ComposedGrid, start: GridIndex, reach: f64) -> impl Iterator<Item = Vec<GridIndex>> + '_ {
    let g = grid.geometry();
    let origin = g.cell_center(start);
    let mut parent: BTreeMap<GridIndex, GridIndex> = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    parent.insert(start, start);
    std::iter::from_fn(move || {
        while let Some(c) = queue.pop_front() {
            if !grid.get(c).is_fatal() {
                // Exits are not expanded: routes only pass through fatal cells.
                let mut route = vec![c];
                let mut cur = c;
                while cur != start {
                    cur = parent[&cur];
                    route.push(cur);
                }
                route.reverse();
                return Some(route);
            }
            for nb in g.neighbors8(c) {
                let cell = grid.get(nb);
                if (cell.is_fatal() && cell.source != CellSource::Inflation)
                    || parent.contains_key(&nb)
                    || g.cell_center(nb).distance(origin) > reach
                {
                    continue;
                }
                parent.insert(nb, c);
                queue.push_back(nb);
            }
        }
        None
    })
}

/// Robot-disc overlap with a polygon, exposed for property checks on logs.
pub fn disc_penetration(center: Point2, radius: f64, poly: &[Point2]) -> f64 {
    physics::penetration(center, radius, poly)
}

/// Jaccard index of two cell sets (1 for two empty sets).
pub fn jaccard(a: &BTreeSet<GridIndex>, b: &BTreeSet<GridIndex>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Footprint cells of every object as currently placed.
pub fn object_cells(world: &World) -> BTreeMap<ObjectId, BTreeSet<GridIndex>> {
    world
        .objects
        .iter()
        .map(|o| {
            let cells = world.geometry.rasterize_polygon(&geometry::transform(&o.footprint, &o.pose));
            (o.id, cells.into_iter().collect())
        })
        .collect()
}

#[cfg(test)]
mod tests;
