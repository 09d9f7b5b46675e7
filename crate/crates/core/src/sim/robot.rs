use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::events::{Event, EventLog};
use crate::geometry::{normalize_heading, Point2, Pose2D};
use crate::sim::observation::{render, Observation};
use crate::sim::planner::{plan_path, PlanError};
use crate::sim::raycast::cast_ray;
use crate::sim::{BehaviorCommand, BehaviorKind, BodyDirection, Clearances, NavState, RobotStatus, SimConfig};
use crate::world::{OccupancyGrid, Scenario, WorldObject};

/// Called after every simulated tick with the fresh status.
pub type TickHook = Box<dyn FnMut(&RobotStatus) + Send>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("a navigation command is active; stop it before issuing behaviors")]
    NavigationActive,
    #[error("invalid behavior magnitude {0}")]
    InvalidMagnitude(f64),
}

/// Scripted change to the world, applied between ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldChange {
    /// Mark every cell with its center inside the box.
    SetRegion { min: Point2, max: Point2, occupied: bool },
    MoveObject { id: String, pose: Point2 },
}

#[derive(Debug, Default)]
struct BoardState {
    status: Option<RobotStatus>,
    objects: Vec<WorldObject>,
}

/// Latest published robot status and object poses, readable from any thread.
#[derive(Debug, Clone, Default)]
pub struct StatusBoard(Arc<RwLock<BoardState>>);

impl StatusBoard {
    pub fn status(&self) -> Option<RobotStatus> {
        self.0.read().expect("status board poisoned").status.clone()
    }

    pub fn objects(&self) -> Vec<WorldObject> {
        self.0.read().expect("status board poisoned").objects.clone()
    }

    fn publish(&self, status: &RobotStatus) {
        self.0.write().expect("status board poisoned").status = Some(status.clone());
    }

    fn publish_objects(&self, objects: &[WorldObject]) {
        self.0.write().expect("status board poisoned").objects = objects.to_vec();
    }
}

struct NavRun {
    dest: Point2,
    waypoints: Vec<Point2>,
    next: usize,
    history: VecDeque<Point2>,
}

/// The simulated robot and its world. Owns all mutable robot state; every
/// motion advances in fixed ticks.
pub struct Simulator {
    config: SimConfig,
    /// Scenario grid plus scripted region edits, without solid objects.
    base_grid: OccupancyGrid,
    grid: OccupancyGrid,
    objects: Vec<WorldObject>,
    pose: Pose2D,
    nav: Option<NavRun>,
    nav_state: NavState,
    blocked_reason: Option<String>,
    odometer: f64,
    ticks: u64,
    scheduled: Vec<(u64, WorldChange)>,
    hooks: Vec<TickHook>,
    events: Option<EventLog>,
    board: StatusBoard,
}

impl Simulator {
    pub fn new(scenario: &Scenario, config: SimConfig) -> Self {
        Self::from_parts(scenario.grid.clone(), scenario.objects.clone(), scenario.robot_start, config)
    }

    pub fn from_parts(grid: OccupancyGrid, objects: Vec<WorldObject>, start: Pose2D, config: SimConfig) -> Self {
        let mut sim = Self {
            config,
            grid: grid.clone(),
            base_grid: grid,
            objects,
            pose: start,
            nav: None,
            nav_state: NavState::Idle,
            blocked_reason: None,
            odometer: 0.0,
            ticks: 0,
            scheduled: Vec::new(),
            hooks: Vec::new(),
            events: None,
            board: StatusBoard::default(),
        };
        sim.rebuild_grid();
        let st = sim.status();
        sim.board.publish(&st);
        sim
    }

    /// Publish a status record per tick to `events`; the log's clock follows
    /// simulated time.
    pub fn attach_events(&mut self, events: EventLog) {
        events.clock().set(self.sim_time());
        self.events = Some(events);
    }

    pub fn attach_board(&mut self, board: StatusBoard) {
        board.publish(&self.status());
        board.publish_objects(&self.objects);
        self.board = board;
    }

    pub(crate) fn events(&self) -> Option<&EventLog> {
        self.events.as_ref()
    }

    pub fn board(&self) -> StatusBoard {
        self.board.clone()
    }

    pub fn add_tick_hook(&mut self, hook: TickHook) {
        self.hooks.push(hook);
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn objects(&self) -> &[WorldObject] {
        &self.objects
    }

    pub fn pose(&self) -> Pose2D {
        self.pose
    }

    pub fn nav_state(&self) -> NavState {
        self.nav_state
    }

    pub fn odometer(&self) -> f64 {
        self.odometer
    }

    pub fn sim_time(&self) -> f64 {
        self.ticks as f64 * self.config.tick
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Teleport, for test setup only; does not touch the odometer.
    pub fn set_pose(&mut self, pose: Pose2D) {
        self.pose = pose;
    }

    pub fn status(&self) -> RobotStatus {
        RobotStatus {
            sim_time: self.sim_time(),
            pose: self.pose,
            clearances: self.sense_clearances(self.pose),
            nav_state: self.nav_state,
            odometer: self.odometer,
            blocked_reason: self.blocked_reason.clone(),
        }
    }

    /// Ray-cast clearances along the four body axes, capped at the sensor range.
    pub fn sense_clearances(&self, pose: Pose2D) -> Clearances {
        let p = pose.position();
        let ray = |d: BodyDirection| cast_ray(&self.grid, p, pose.direction(d.offset_deg()), self.config.clearance_range);
        Clearances {
            front: ray(BodyDirection::Front),
            rear: ray(BodyDirection::Rear),
            left: ray(BodyDirection::Left),
            right: ray(BodyDirection::Right),
        }
    }

    pub fn render_observation(&self) -> Observation {
        self.render_observation_at(self.pose)
    }

    pub fn render_observation_at(&self, pose: Pose2D) -> Observation {
        let forward = self.sense_clearances(pose).front;
        render(&self.grid, &self.objects, pose, self.config.fov_deg, self.config.view_range, forward)
    }

    // ---- world edits --------------------------------------------------------

    pub fn apply_change(&mut self, change: WorldChange) {
        match change {
            WorldChange::SetRegion { min, max, occupied } => self.base_grid.fill_rect(min, max, occupied),
            WorldChange::MoveObject { id, pose } => {
                if let Some(o) = self.objects.iter_mut().find(|o| o.id == id) {
                    o.pose = pose;
                }
                self.board.publish_objects(&self.objects);
            }
        }
        self.rebuild_grid();
    }

    /// Apply `change` once simulated time reaches `at` seconds.
    pub fn schedule_change(&mut self, at: f64, change: WorldChange) {
        let tick = (at / self.config.tick).round().max(0.0) as u64;
        self.scheduled.push((tick, change));
    }

    fn rebuild_grid(&mut self) {
        let mut grid = self.base_grid.clone();
        for o in self.objects.iter().filter(|o| o.solid) {
            grid.fill_disc(o.pose, o.footprint_radius);
        }
        // the robot's own cell stays free so it is never inside an obstacle
        if let Some(c) = grid.world_to_cell(self.pose.position()) {
            grid.set(c, false);
        }
        self.grid = grid;
    }

    // ---- ticking ------------------------------------------------------------

    fn finish_tick(&mut self) {
        self.ticks += 1;
        let now = self.ticks;
        let due: Vec<WorldChange> = {
            let (due, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.scheduled).into_iter().partition(|(t, _)| *t <= now);
            self.scheduled = keep;
            due.into_iter().map(|(_, c)| c).collect()
        };
        for c in due {
            self.apply_change(c);
        }
        let status = self.status();
        if let Some(ev) = &self.events {
            ev.clock().set(status.sim_time);
            ev.emit(Event::Status(status.clone()));
        }
        self.board.publish(&status);
        let mut hooks = std::mem::take(&mut self.hooks);
        for h in hooks.iter_mut() {
            h(&status);
        }
        hooks.append(&mut self.hooks);
        self.hooks = hooks;
    }

    /// Let one tick pass without motion.
    pub fn idle_tick(&mut self) -> RobotStatus {
        self.finish_tick();
        self.status()
    }

    // ---- navigation ---------------------------------------------------------

    /// Plan to `dest` and start following the path. Returns the plan error
    /// (and enters `blocked`) when no path exists.
    pub fn start_navigation(&mut self, dest: Point2) -> Result<(), PlanError> {
        self.blocked_reason = None;
        if self.pose.position().distance(dest) <= self.config.arrival_tolerance {
            self.nav = None;
            self.nav_state = NavState::Arrived;
            return Ok(());
        }
        match plan_path(&self.grid, self.pose.position(), dest, self.config.robot_radius) {
            Ok(path) => {
                self.nav = Some(NavRun {
                    dest,
                    waypoints: path.waypoints,
                    next: 0,
                    history: VecDeque::from([self.pose.position()]),
                });
                self.nav_state = NavState::Navigating;
                Ok(())
            }
            Err(e) => {
                self.nav = None;
                self.nav_state = NavState::Blocked;
                self.blocked_reason = Some(format!("unreachable: {e}"));
                Err(e)
            }
        }
    }

    /// Advance one tick. While navigating the robot moves up to
    /// `speed · tick` along its path.
    pub fn step(&mut self) -> RobotStatus {
        if self.nav_state == NavState::Navigating {
            self.nav_motion();
        }
        self.finish_tick();
        self.status()
    }

    fn nav_motion(&mut self) {
        let Some(mut run) = self.nav.take() else {
            self.nav_state = NavState::Idle;
            return;
        };
        let margin = self.config.safety_margin;
        let mut budget = self.config.speed * self.config.tick;
        while budget > 1e-12 && run.next < run.waypoints.len() {
            let pos = self.pose.position();
            let wp = run.waypoints[run.next];
            let to = wp - pos;
            let d = to.norm();
            if d < 1e-9 {
                run.next += 1;
                continue;
            }
            let dir = to * (1.0 / d);
            self.pose.heading = normalize_heading(dir.y.atan2(dir.x).to_degrees());
            let want = budget.min(d);
            let clear = cast_ray(&self.grid, pos, dir, want + margin + self.grid.resolution());
            let allowed = want.min(clear - margin);
            if allowed <= 0.0 {
                break;
            }
            let new = if allowed >= d { wp } else { pos + dir * allowed };
            self.odometer += pos.distance(new);
            self.pose.x = new.x;
            self.pose.y = new.y;
            budget -= allowed;
            if allowed >= d {
                run.next += 1;
            } else if allowed < want {
                break;
            }
        }

        if run.next >= run.waypoints.len() {
            if self.pose.position().distance(run.dest) <= self.config.arrival_tolerance + 1e-9 {
                self.nav_state = NavState::Arrived;
            } else {
                self.nav_state = NavState::Blocked;
                self.blocked_reason = Some("path ended outside arrival tolerance".into());
            }
            return;
        }

        run.history.push_back(self.pose.position());
        while run.history.len() > self.config.stall_ticks + 1 {
            run.history.pop_front();
        }
        if run.history.len() == self.config.stall_ticks + 1 {
            let net = run.history.front().expect("non-empty").distance(self.pose.position());
            if net < self.config.stall_progress {
                self.nav_state = NavState::Blocked;
                self.blocked_reason = Some(format!(
                    "stalled: {net:.3} m progress over {} ticks",
                    self.config.stall_ticks
                ));
                return;
            }
        }
        self.nav = Some(run);
    }

    /// Run navigation to a terminal state, polling `should_stop` between
    /// ticks. Returns the terminal state (or `Idle` if stopped).
    pub fn execute_navigation(&mut self, dest: Point2, mut should_stop: impl FnMut() -> bool) -> NavState {
        if self.start_navigation(dest).is_err() {
            return NavState::Blocked;
        }
        while self.nav_state == NavState::Navigating {
            if should_stop() {
                self.halt();
                return NavState::Idle;
            }
            self.step();
        }
        self.nav_state
    }

    /// Cancel navigation immediately.
    pub fn halt(&mut self) {
        self.nav = None;
        if self.nav_state == NavState::Navigating {
            self.nav_state = NavState::Idle;
        }
    }

    // ---- behaviors ----------------------------------------------------------

    /// Execute one atomic behavior over as many ticks as it needs.
    /// Translations are clipped to the clearance minus the safety margin.
    pub fn execute_behavior(&mut self, cmd: BehaviorCommand) -> Result<RobotStatus, SimError> {
        if cmd.kind == BehaviorKind::Stop {
            self.halt();
            return Ok(self.status());
        }
        if self.nav_state == NavState::Navigating {
            return Err(SimError::NavigationActive);
        }
        if !(cmd.magnitude > 0.0) || !cmd.magnitude.is_finite() {
            return Err(SimError::InvalidMagnitude(cmd.magnitude));
        }
        self.nav_state = NavState::Idle;
        self.blocked_reason = None;

        if cmd.kind.is_turn() {
            let sign = if cmd.kind == BehaviorKind::TurnLeft { 1.0 } else { -1.0 };
            let per_tick = self.config.turn_rate * self.config.tick;
            let start = self.pose.heading;
            let n = (cmd.magnitude / per_tick - 1e-9).ceil().max(1.0) as u64;
            for k in 1..=n {
                let swept = (k as f64 * per_tick).min(cmd.magnitude);
                self.pose.heading = normalize_heading(start + sign * swept);
                self.finish_tick();
            }
            return Ok(self.status());
        }

        let dir_kind = cmd.kind.travel_direction().expect("translation kinds have a direction");
        let dir = self.pose.direction(dir_kind.offset_deg());
        let start = self.pose.position();
        let reach = cmd.magnitude + self.config.safety_margin + self.grid.resolution();
        let clear = cast_ray(&self.grid, start, dir, reach.max(self.config.clearance_range));
        let allowed = cmd.magnitude.min(clear - self.config.safety_margin).max(0.0);
        let per_tick = self.config.speed * self.config.tick;
        let n = (allowed / per_tick - 1e-9).ceil().max(0.0) as u64;
        let mut prev = start;
        for k in 1..=n {
            let s = (k as f64 * per_tick).min(allowed);
            let p = if k == n { start + dir * allowed } else { start + dir * s };
            self.odometer += prev.distance(p);
            self.pose.x = p.x;
            self.pose.y = p.y;
            prev = p;
            self.finish_tick();
        }
        Ok(self.status())
    }
}
