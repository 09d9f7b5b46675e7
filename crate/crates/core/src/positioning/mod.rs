//! Vision-guided fine positioning: observe, ask for a direction/distance
//! verdict, take one short action, repeat.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::events::{Event, EventLog};
use crate::geometry::Pose2D;
use crate::reasoning::{Gateway, ReasoningError};
use crate::sim::{BehaviorCommand, BehaviorKind, Observation, Simulator};
use crate::world::TargetPredicate;

pub const APPROPRIATE_MIN_M: f64 = 0.5;
pub const APPROPRIATE_MAX_M: f64 = 0.8;
pub const LOOK_AROUND_DEG: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Center,
    NotVisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBand {
    TooFar,
    TooClose,
    Appropriate,
    NotVisible,
}

/// Classifies an apparent distance against the `[0.5, 0.8]` m band.
pub fn distance_band(d: f64) -> DistanceBand {
    if d < APPROPRIATE_MIN_M {
        DistanceBand::TooClose
    } else if d > APPROPRIATE_MAX_M {
        DistanceBand::TooFar
    } else {
        DistanceBand::Appropriate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningDecision {
    pub direction: Direction,
    pub distance: DistanceBand,
    pub reasoning: String,
}

impl PositioningDecision {
    pub fn new(direction: Direction, distance: DistanceBand, reasoning: impl Into<String>) -> Self {
        Self { direction, distance, reasoning: reasoning.into() }
    }

    pub fn not_visible(reasoning: impl Into<String>) -> Self {
        Self::new(Direction::NotVisible, DistanceBand::NotVisible, reasoning)
    }

    /// `not_visible` appears in both fields or neither; reasoning non-empty.
    pub fn validate(&self) -> Result<(), String> {
        let dir_nv = self.direction == Direction::NotVisible;
        let dist_nv = self.distance == DistanceBand::NotVisible;
        if dir_nv != dist_nv {
            return Err("not_visible must be used for both direction and distance".into());
        }
        if self.reasoning.trim().is_empty() {
            return Err("reasoning is empty".into());
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.direction == Direction::Center && self.distance == DistanceBand::Appropriate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Behavior(BehaviorCommand),
    Complete,
}

/// Direction outranks distance; an invisible target triggers a fixed-direction
/// look-around turn.
pub fn decision_to_action(d: &PositioningDecision) -> Action {
    use BehaviorKind::*;
    let b = |k| Action::Behavior(BehaviorCommand::default_for(k));
    match (d.direction, d.distance) {
        (Direction::NotVisible, _) | (_, DistanceBand::NotVisible) => {
            Action::Behavior(BehaviorCommand::new(TurnLeft, LOOK_AROUND_DEG))
        }
        (Direction::Left, _) => b(TurnLeft),
        (Direction::Right, _) => b(TurnRight),
        (Direction::Center, DistanceBand::TooFar) => b(MoveForward),
        (Direction::Center, DistanceBand::TooClose) => b(MoveBackward),
        (Direction::Center, DistanceBand::Appropriate) => Action::Complete,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningConfig {
    pub max_iterations: u32,
    /// Same pose and decision seen this many times triggers a sidestep.
    pub oscillation_repeats: u32,
    pub sidestep_m: f64,
}

impl Default for PositioningConfig {
    fn default() -> Self {
        Self { max_iterations: 60, oscillation_repeats: 3, sidestep_m: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositioningOutcome {
    Completed,
    MaxIterations,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: u32,
    pub observation_digest: String,
    pub direction: Direction,
    pub distance: DistanceBand,
    pub reasoning: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningReport {
    pub completed: bool,
    pub iterations: u32,
    pub final_pose: Pose2D,
    pub outcome: PositioningOutcome,
    pub trace: Vec<TraceEntry>,
}

pub fn observation_digest(obs: &Observation) -> String {
    let bytes = serde_json::to_vec(obs).expect("observations serialize");
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// What the loop is positioning toward.
#[derive(Debug, Clone, Copy)]
pub struct PositioningGoal<'a> {
    pub task_id: &'a str,
    pub instruction: &'a str,
    pub target: Option<&'a TargetPredicate>,
}

/// Runs the observe–decide–act loop until completion, the iteration budget
/// or a stop signal. Only reasoning failures are errors.
pub fn position_to_target(
    sim: &mut Simulator,
    gateway: &Gateway,
    goal: PositioningGoal<'_>,
    cfg: &PositioningConfig,
    events: Option<&EventLog>,
    should_stop: &dyn Fn() -> bool,
) -> Result<PositioningReport, ReasoningError> {
    let mut trace = Vec::new();
    let mut seen: HashMap<(i64, i64, i64, Direction, DistanceBand), u32> = HashMap::new();
    let mut sidestep_left = true;
    let mut outcome = PositioningOutcome::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        if should_stop() {
            outcome = PositioningOutcome::Stopped;
            break;
        }
        let obs = sim.render_observation();
        let digest = observation_digest(&obs);
        let decision = gateway.pos_decide(goal.instruction, goal.target, &obs)?;
        let action = decision_to_action(&decision);

        let pose = sim.pose();
        let key = (
            (pose.x * 100.0).round() as i64,
            (pose.y * 100.0).round() as i64,
            pose.heading.round() as i64,
            decision.direction,
            decision.distance,
        );
        let repeats = seen.entry(key).or_insert(0);
        *repeats += 1;
        let oscillating = *repeats >= cfg.oscillation_repeats && action != Action::Complete;

        let (command, label) = match action {
            Action::Complete => (None, "complete".to_string()),
            Action::Behavior(_) if oscillating => {
                seen.clear();
                let kind = if sidestep_left { BehaviorKind::OmniLeft } else { BehaviorKind::OmniRight };
                sidestep_left = !sidestep_left;
                let c = BehaviorCommand::new(kind, cfg.sidestep_m);
                (Some(c), format!("sidestep {}", c.describe()))
            }
            Action::Behavior(c) => (Some(c), c.describe()),
        };
        let entry = TraceEntry {
            iteration,
            observation_digest: digest,
            direction: decision.direction,
            distance: decision.distance,
            reasoning: decision.reasoning,
            action: label,
        };
        if let Some(ev) = events {
            ev.emit(Event::PositioningStep { task_id: goal.task_id.to_string(), entry: entry.clone() });
        }
        trace.push(entry);

        let Some(command) = command else {
            outcome = PositioningOutcome::Completed;
            break;
        };
        if should_stop() {
            outcome = PositioningOutcome::Stopped;
            break;
        }
        // a rejected command is logged by the gate; the loop just observes again
        let _ = sim.send_behavior(command);
    }

    Ok(PositioningReport {
        completed: outcome == PositioningOutcome::Completed,
        iterations: trace.len() as u32,
        final_pose: sim.pose(),
        outcome,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(dir: Direction, dist: DistanceBand) -> PositioningDecision {
        PositioningDecision::new(dir, dist, "test")
    }

    #[test]
    fn direction_outranks_distance() {
        let a = decision_to_action(&d(Direction::Left, DistanceBand::TooFar));
        assert_eq!(a, Action::Behavior(BehaviorCommand::new(BehaviorKind::TurnLeft, 15.0)));
        let a = decision_to_action(&d(Direction::Right, DistanceBand::Appropriate));
        assert_eq!(a, Action::Behavior(BehaviorCommand::new(BehaviorKind::TurnRight, 15.0)));
    }

    #[test]
    fn distance_actions() {
        let a = decision_to_action(&d(Direction::Center, DistanceBand::TooClose));
        assert_eq!(a, Action::Behavior(BehaviorCommand::new(BehaviorKind::MoveBackward, 0.25)));
        let a = decision_to_action(&d(Direction::Center, DistanceBand::TooFar));
        assert_eq!(a, Action::Behavior(BehaviorCommand::new(BehaviorKind::MoveForward, 0.25)));
        assert_eq!(decision_to_action(&d(Direction::Center, DistanceBand::Appropriate)), Action::Complete);
        let a = decision_to_action(&d(Direction::NotVisible, DistanceBand::NotVisible));
        assert_eq!(a, Action::Behavior(BehaviorCommand::new(BehaviorKind::TurnLeft, 40.0)));
    }

    #[test]
    fn band_edges() {
        assert_eq!(distance_band(0.3), DistanceBand::TooClose);
        assert_eq!(distance_band(0.5), DistanceBand::Appropriate);
        assert_eq!(distance_band(0.65), DistanceBand::Appropriate);
        assert_eq!(distance_band(0.8), DistanceBand::Appropriate);
        assert_eq!(distance_band(3.0), DistanceBand::TooFar);
    }

    #[test]
    fn decision_invariant() {
        assert!(d(Direction::NotVisible, DistanceBand::TooFar).validate().is_err());
        assert!(d(Direction::Left, DistanceBand::NotVisible).validate().is_err());
        assert!(PositioningDecision::new(Direction::Center, DistanceBand::Appropriate, " ").validate().is_err());
        assert!(d(Direction::Center, DistanceBand::Appropriate).validate().is_ok());
    }
}
