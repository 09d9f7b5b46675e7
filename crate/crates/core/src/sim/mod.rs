//! Deterministic 2D robot: grid path following, single-action behaviors,
//! four-direction clearances and structured camera observations.

mod gate;
mod observation;
mod planner;
mod raycast;
mod robot;

use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;

pub use gate::{validate_outbound_command, OutboundCommand, Rejection, MAX_TRANSLATION_M, MAX_TURN_DEG};
pub use observation::{region_for_bearing, FrameObject, Observation, Region};
pub use planner::{astar, plan_path, successors, Path, PlanError, StepCost, GOAL_SNAP_RADIUS_M};
pub use raycast::{cast_ray, line_of_sight};
pub use robot::{SimError, Simulator, StatusBoard, TickHook, WorldChange};

/// Kinematic and sensing constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// m/s
    pub speed: f64,
    /// deg/s
    pub turn_rate: f64,
    /// s
    pub tick: f64,
    pub robot_radius: f64,
    pub safety_margin: f64,
    pub arrival_tolerance: f64,
    pub stall_ticks: usize,
    pub stall_progress: f64,
    pub clearance_range: f64,
    pub fov_deg: f64,
    pub view_range: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            speed: 0.5,
            turn_rate: 60.0,
            tick: 0.1,
            robot_radius: 0.35,
            safety_margin: 0.05,
            arrival_tolerance: 0.5,
            stall_ticks: 30,
            stall_progress: 0.05,
            clearance_range: 5.0,
            fov_deg: 90.0,
            view_range: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Clearances {
    pub front: f64,
    pub rear: f64,
    pub left: f64,
    pub right: f64,
}

/// One of the four body directions clearances are measured along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyDirection {
    Front,
    Rear,
    Left,
    Right,
}

impl BodyDirection {
    /// Counter-clockwise offset from the heading.
    pub fn offset_deg(self) -> f64 {
        match self {
            BodyDirection::Front => 0.0,
            BodyDirection::Rear => 180.0,
            BodyDirection::Left => 90.0,
            BodyDirection::Right => -90.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            BodyDirection::Front => BodyDirection::Rear,
            BodyDirection::Rear => BodyDirection::Front,
            BodyDirection::Left => BodyDirection::Right,
            BodyDirection::Right => BodyDirection::Left,
        }
    }
}

impl Clearances {
    pub fn get(&self, d: BodyDirection) -> f64 {
        match d {
            BodyDirection::Front => self.front,
            BodyDirection::Rear => self.rear,
            BodyDirection::Left => self.left,
            BodyDirection::Right => self.right,
        }
    }

    /// Direction with the smallest clearance; ties go front, rear, left, right.
    pub fn minimum(&self) -> (BodyDirection, f64) {
        [BodyDirection::Front, BodyDirection::Rear, BodyDirection::Left, BodyDirection::Right]
            .into_iter()
            .map(|d| (d, self.get(d)))
            .fold((BodyDirection::Front, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavState {
    Idle,
    Navigating,
    Arrived,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotStatus {
    pub sim_time: f64,
    pub pose: Pose2D,
    pub clearances: Clearances,
    pub nav_state: NavState,
    pub odometer: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocked_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    MoveForward,
    MoveBackward,
    TurnLeft,
    TurnRight,
    OmniLeft,
    OmniRight,
    Stop,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 7] = [
        BehaviorKind::MoveForward,
        BehaviorKind::MoveBackward,
        BehaviorKind::TurnLeft,
        BehaviorKind::TurnRight,
        BehaviorKind::OmniLeft,
        BehaviorKind::OmniRight,
        BehaviorKind::Stop,
    ];

    pub fn is_turn(self) -> bool {
        matches!(self, BehaviorKind::TurnLeft | BehaviorKind::TurnRight)
    }

    /// Body direction of travel for translations.
    pub fn travel_direction(self) -> Option<BodyDirection> {
        match self {
            BehaviorKind::MoveForward => Some(BodyDirection::Front),
            BehaviorKind::MoveBackward => Some(BodyDirection::Rear),
            BehaviorKind::OmniLeft => Some(BodyDirection::Left),
            BehaviorKind::OmniRight => Some(BodyDirection::Right),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BehaviorKind::MoveForward => "move_forward",
            BehaviorKind::MoveBackward => "move_backward",
            BehaviorKind::TurnLeft => "turn_left",
            BehaviorKind::TurnRight => "turn_right",
            BehaviorKind::OmniLeft => "omni_left",
            BehaviorKind::OmniRight => "omni_right",
            BehaviorKind::Stop => "stop",
        }
    }
}

pub const DEFAULT_TRANSLATION_M: f64 = 0.25;
pub const DEFAULT_TURN_DEG: f64 = 15.0;

/// Single-action motion command. Magnitude is meters for translations and
/// degrees for turns; ignored for `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCommand {
    pub kind: BehaviorKind,
    pub magnitude: f64,
}

impl BehaviorCommand {
    pub fn new(kind: BehaviorKind, magnitude: f64) -> Self {
        Self { kind, magnitude }
    }

    /// The command with its default magnitude (0.25 m or 15°).
    pub fn default_for(kind: BehaviorKind) -> Self {
        let magnitude = match kind {
            BehaviorKind::Stop => 0.0,
            k if k.is_turn() => DEFAULT_TURN_DEG,
            _ => DEFAULT_TRANSLATION_M,
        };
        Self { kind, magnitude }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            BehaviorKind::Stop => "stop".into(),
            k if k.is_turn() => format!("{} {}deg", k.name(), self.magnitude),
            k => format!("{} {}m", k.name(), self.magnitude),
        }
    }
}
