//! Rule-based check applied to every command before it reaches the robot.

use serde::{Deserialize, Serialize};

use crate::events::Event;
use crate::geometry::Point2;
use crate::sim::{BehaviorCommand, BehaviorKind, NavState, RobotStatus, Simulator};

pub const MAX_TRANSLATION_M: f64 = 1.0;
pub const MAX_TURN_DEG: f64 = 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutboundCommand {
    Navigate { x: f64, y: f64 },
    Behavior { kind: String, #[serde(default)] magnitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("unknown behavior kind {0:?}")]
    UnknownKind(String),
    #[error("magnitude {0} outside (0, {1}]")]
    Magnitude(String, String),
    #[error("destination ({0}, {1}) is out of bounds")]
    OutOfBounds(String, String),
}

fn kind_from_name(name: &str) -> Option<BehaviorKind> {
    BehaviorKind::ALL.into_iter().find(|k| k.name() == name)
}

/// Accepts whitelisted behaviors within magnitude bounds and destinations
/// inside the map rectangle `[min, max]`.
pub fn validate_outbound_command(cmd: &OutboundCommand, bounds: (Point2, Point2)) -> Result<(), Rejection> {
    match cmd {
        OutboundCommand::Navigate { x, y } => {
            let (lo, hi) = bounds;
            let inside = x.is_finite() && y.is_finite() && *x >= lo.x && *x <= hi.x && *y >= lo.y && *y <= hi.y;
            if inside {
                Ok(())
            } else {
                Err(Rejection::OutOfBounds(x.to_string(), y.to_string()))
            }
        }
        OutboundCommand::Behavior { kind, magnitude } => {
            let k = kind_from_name(kind).ok_or_else(|| Rejection::UnknownKind(kind.clone()))?;
            check_behavior(&BehaviorCommand::new(k, *magnitude))
        }
    }
}

fn check_behavior(cmd: &BehaviorCommand) -> Result<(), Rejection> {
    if cmd.kind == BehaviorKind::Stop {
        return Ok(());
    }
    let max = if cmd.kind.is_turn() { MAX_TURN_DEG } else { MAX_TRANSLATION_M };
    if cmd.magnitude.is_finite() && cmd.magnitude > 0.0 && cmd.magnitude <= max {
        Ok(())
    } else {
        Err(Rejection::Magnitude(cmd.magnitude.to_string(), max.to_string()))
    }
}

impl From<BehaviorCommand> for OutboundCommand {
    fn from(c: BehaviorCommand) -> Self {
        OutboundCommand::Behavior { kind: c.kind.name().to_string(), magnitude: c.magnitude }
    }
}

impl Simulator {
    fn map_bounds(&self) -> (Point2, Point2) {
        self.grid().bounds()
    }

    fn reject(&self, command: String, reason: &Rejection) {
        tracing::warn!("rejected outbound command {command}: {reason}");
        if let Some(ev) = self.events() {
            ev.emit(Event::BehaviorRejected { command, reason: reason.to_string() });
        }
    }

    /// Validates and executes one behavior, logging it either way.
    pub fn send_behavior(&mut self, cmd: BehaviorCommand) -> Result<RobotStatus, Rejection> {
        if let Err(r) = check_behavior(&cmd) {
            self.reject(cmd.describe(), &r);
            return Err(r);
        }
        if let Some(ev) = self.events() {
            ev.emit(Event::BehaviorIssued { command: cmd.describe() });
        }
        match self.execute_behavior(cmd) {
            Ok(st) => Ok(st),
            Err(e) => {
                let r = Rejection::Magnitude(cmd.magnitude.to_string(), e.to_string());
                self.reject(cmd.describe(), &r);
                Err(r)
            }
        }
    }

    /// Validates `dest` against the map bounds and runs navigation to a
    /// terminal state, polling `should_stop` between ticks.
    pub fn send_navigation(&mut self, dest: Point2, should_stop: impl FnMut() -> bool) -> Result<NavState, Rejection> {
        let cmd = OutboundCommand::Navigate { x: dest.x, y: dest.y };
        if let Err(r) = validate_outbound_command(&cmd, self.map_bounds()) {
            self.reject(format!("navigate ({:.2}, {:.2})", dest.x, dest.y), &r);
            return Err(r);
        }
        Ok(self.execute_navigation(dest, should_stop))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b() -> (Point2, Point2) {
        (Point2::new(0.0, 0.0), Point2::new(30.0, 20.0))
    }

    #[test]
    fn whitelist_and_bounds() {
        let ok = OutboundCommand::Behavior { kind: "move_forward".into(), magnitude: 0.25 };
        assert!(validate_outbound_command(&ok, b()).is_ok());
        let big = OutboundCommand::Behavior { kind: "move_forward".into(), magnitude: 50.0 };
        assert!(matches!(validate_outbound_command(&big, b()), Err(Rejection::Magnitude(..))));
        let spin = OutboundCommand::Behavior { kind: "turn_left".into(), magnitude: 181.0 };
        assert!(validate_outbound_command(&spin, b()).is_err());
        let jump = OutboundCommand::Behavior { kind: "jump".into(), magnitude: 0.25 };
        assert!(matches!(validate_outbound_command(&jump, b()), Err(Rejection::UnknownKind(_))));
        let stop = OutboundCommand::Behavior { kind: "stop".into(), magnitude: 0.0 };
        assert!(validate_outbound_command(&stop, b()).is_ok());
        let far = OutboundCommand::Navigate { x: -999.0, y: -999.0 };
        assert!(matches!(validate_outbound_command(&far, b()), Err(Rejection::OutOfBounds(..))));
        let nan = OutboundCommand::Navigate { x: f64::NAN, y: 1.0 };
        assert!(validate_outbound_command(&nan, b()).is_err());
    }
}
