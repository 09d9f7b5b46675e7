//! Zone-level navigation: label registry preparation, destination
//! resolution and supervised driving with clearance-based recovery.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::events::{Event, EventLog};
use crate::geometry::Point2;
use crate::reasoning::{Gateway, LabelCandidate, NeighborLabel, ReasoningError, RequestPayload};
use crate::sim::{BehaviorCommand, BehaviorKind, BodyDirection, NavState, Simulator};
use crate::world::Scenario;

pub const RECOVERY_BUDGET: u32 = 3;
pub const RECOVERY_DISTANCE_M: f64 = 0.5;
const DESCRIBE_NEIGHBORS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NavError {
    #[error("the scenario has no zone labels")]
    EmptyRegistry,
    #[error("no description for label {0}: {1}")]
    Description(String, String),
    #[error("unknown zone label {0:?}")]
    UnknownLabel(String),
    #[error("no zone label matches {0:?}")]
    NoMatch(String),
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub world_pos: Point2,
    pub description: String,
    #[serde(skip)]
    pub kind: Option<String>,
}

/// Label names, world positions and descriptions for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneRegistry {
    pub scenario: String,
    pub transform_digest: String,
    pub labels: Vec<RegistryEntry>,
}

impl ZoneRegistry {
    /// Case-insensitive exact lookup.
    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        let name = name.trim();
        self.labels.iter().find(|l| l.name.eq_ignore_ascii_case(name))
    }

    pub fn candidates(&self) -> Vec<LabelCandidate> {
        self.labels
            .iter()
            .map(|l| LabelCandidate { name: l.name.clone(), position: l.world_pos, description: l.description.clone() })
            .collect()
    }

    /// The registry as a JSON document of `{name, world_pos, description}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registries serialize")
    }
}

/// Builds the registry; every label needs a non-empty description before
/// any task may start. Scripted descriptions are kept as given.
pub fn prepare_registry(scenario: &Scenario, gateway: &Gateway) -> Result<ZoneRegistry, NavError> {
    if scenario.labels.is_empty() {
        return Err(NavError::EmptyRegistry);
    }
    let (map_min, map_max) = scenario.grid.bounds();
    let mut labels = Vec::with_capacity(scenario.labels.len());
    for label in &scenario.labels {
        let description = match &label.description {
            Some(d) => d.clone(),
            None => {
                let mut neighbors: Vec<NeighborLabel> = scenario
                    .labels
                    .iter()
                    .filter(|o| o.name != label.name)
                    .map(|o| NeighborLabel {
                        name: o.name.clone(),
                        position: o.world_pos,
                        distance: o.world_pos.distance(label.world_pos),
                    })
                    .collect();
                neighbors.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.name.cmp(&b.name)));
                neighbors.truncate(DESCRIBE_NEIGHBORS);
                let payload = RequestPayload::NavDescribe {
                    label: label.name.clone(),
                    kind: label.kind.clone(),
                    position: label.world_pos,
                    map_min,
                    map_max,
                    neighbors,
                };
                gateway
                    .describe(payload)
                    .map_err(|e| NavError::Description(label.name.clone(), e.to_string()))?
            }
        };
        if description.trim().is_empty() {
            return Err(NavError::Description(label.name.clone(), "empty".into()));
        }
        labels.push(RegistryEntry { name: label.name.clone(), world_pos: label.world_pos, description, kind: label.kind.clone() });
    }
    let transform_digest = hex::encode(Sha256::digest(serde_json::to_vec(&scenario.transform).expect("transforms serialize")));
    let scenario_ref = scenario.source.as_ref().map_or_else(|| scenario.name.clone(), |p| p.display().to_string());
    Ok(ZoneRegistry { scenario: scenario_ref, transform_digest, labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionMethod {
    ExactLabel,
    Semantic,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationResolution {
    pub position: Point2,
    pub method: ResolutionMethod,
    pub labels: Vec<String>,
}

/// Parsed form of a derived destination expression.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivedExpr {
    Midpoint(String, String),
    Offset { meters: f64, toward: Point2, label: String },
}

fn cardinal_vector(word: &str) -> Option<Point2> {
    let d = std::f64::consts::FRAC_1_SQRT_2;
    Some(match word {
        "north" => Point2::new(0.0, 1.0),
        "south" => Point2::new(0.0, -1.0),
        "east" => Point2::new(1.0, 0.0),
        "west" => Point2::new(-1.0, 0.0),
        "northeast" => Point2::new(d, d),
        "northwest" => Point2::new(-d, d),
        "southeast" => Point2::new(d, -d),
        "southwest" => Point2::new(-d, -d),
        _ => return None,
    })
}

/// `center between <A> and <B>` or `<x> m <cardinal> of <L>`.
pub fn parse_derived(expr: &str) -> Option<DerivedExpr> {
    let words: Vec<&str> = expr.split_whitespace().collect();
    let lower: Vec<String> = words.iter().map(|w| w.to_ascii_lowercase()).collect();
    let lw: Vec<&str> = lower.iter().map(String::as_str).collect();
    let lw = if lw.first() == Some(&"the") { &lw[1..] } else { &lw[..] };
    let skip = words.len() - lw.len();
    let words = &words[skip..];
    match lw {
        [c, "between", _, "and", _] if matches!(*c, "center" | "centre" | "midpoint" | "middle") => {
            Some(DerivedExpr::Midpoint(words[2].to_string(), words[4].to_string()))
        }
        ["between", _, "and", _] => Some(DerivedExpr::Midpoint(words[1].to_string(), words[3].to_string())),
        [n, unit, dir, "of", _] if matches!(*unit, "m" | "meter" | "meters" | "metres") => {
            let meters: f64 = n.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0)?;
            Some(DerivedExpr::Offset { meters, toward: cardinal_vector(dir)?, label: words[4].to_string() })
        }
        [n, dir, "of", _] => {
            let meters: f64 = n.strip_suffix('m')?.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0)?;
            Some(DerivedExpr::Offset { meters, toward: cardinal_vector(dir)?, label: words[3].to_string() })
        }
        _ => None,
    }
}

fn strip_article(s: &str) -> &str {
    let s = s.trim();
    match s.get(..4) {
        Some(p) if p.eq_ignore_ascii_case("the ") => s[4..].trim(),
        _ => s,
    }
}

/// Exact label first (no reasoning call), then the derived-expression
/// grammar, then semantic selection over the descriptions.
pub fn resolve_destination(
    expr: &str,
    registry: &ZoneRegistry,
    gateway: &Gateway,
    robot: Point2,
) -> Result<DestinationResolution, NavError> {
    let expr = expr.trim();
    if let Some(l) = registry.get(expr).or_else(|| registry.get(strip_article(expr))) {
        return Ok(DestinationResolution { position: l.world_pos, method: ResolutionMethod::ExactLabel, labels: vec![l.name.clone()] });
    }
    if let Some(d) = parse_derived(expr) {
        let get = |n: &str| registry.get(n).ok_or_else(|| NavError::UnknownLabel(n.to_string()));
        return Ok(match d {
            DerivedExpr::Midpoint(a, b) => {
                let (a, b) = (get(&a)?, get(&b)?);
                DestinationResolution {
                    position: a.world_pos.midpoint(b.world_pos),
                    method: ResolutionMethod::Derived,
                    labels: vec![a.name.clone(), b.name.clone()],
                }
            }
            DerivedExpr::Offset { meters, toward, label } => {
                let l = get(&label)?;
                DestinationResolution {
                    position: l.world_pos + toward * meters,
                    method: ResolutionMethod::Derived,
                    labels: vec![l.name.clone()],
                }
            }
        });
    }
    match gateway.select(expr, registry.candidates(), robot)? {
        Some(name) => {
            let l = registry.get(&name).ok_or_else(|| NavError::UnknownLabel(name.clone()))?;
            Ok(DestinationResolution { position: l.world_pos, method: ResolutionMethod::Semantic, labels: vec![l.name.clone()] })
        }
        None => Err(NavError::NoMatch(expr.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavFailure {
    Unreachable,
    RecoveryExhausted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum NavOutcome {
    Arrived { recoveries: u32 },
    Stopped,
    Failed { reason: NavFailure, detail: String },
}

fn escape_kind(d: BodyDirection) -> BehaviorKind {
    match d {
        BodyDirection::Front => BehaviorKind::MoveForward,
        BodyDirection::Rear => BehaviorKind::MoveBackward,
        BodyDirection::Left => BehaviorKind::OmniLeft,
        BodyDirection::Right => BehaviorKind::OmniRight,
    }
}

/// Drives to `dest`; on a stall, backs 0.5 m away from the nearest obstacle
/// and replans, at most [`RECOVERY_BUDGET`] times. A stop request ends the
/// run as `Stopped`.
pub fn supervise_navigation(
    sim: &mut Simulator,
    dest: Point2,
    task_id: &str,
    events: Option<&EventLog>,
    should_stop: &dyn Fn() -> bool,
) -> NavOutcome {
    let mut recoveries = 0;
    loop {
        if should_stop() {
            return NavOutcome::Stopped;
        }
        let state = match sim.send_navigation(dest, should_stop) {
            Ok(s) => s,
            Err(r) => return NavOutcome::Failed { reason: NavFailure::Rejected, detail: r.to_string() },
        };
        match state {
            NavState::Arrived => return NavOutcome::Arrived { recoveries },
            NavState::Idle | NavState::Navigating => return NavOutcome::Stopped,
            NavState::Blocked => {}
        }
        let reason = sim.status().blocked_reason.unwrap_or_default();
        if reason.starts_with("unreachable") {
            return NavOutcome::Failed { reason: NavFailure::Unreachable, detail: reason };
        }
        if recoveries >= RECOVERY_BUDGET {
            return NavOutcome::Failed {
                reason: NavFailure::RecoveryExhausted,
                detail: format!("still blocked after {recoveries} recoveries: {reason}"),
            };
        }
        if should_stop() {
            return NavOutcome::Stopped;
        }
        recoveries += 1;
        let (toward, before) = sim.status().clearances.minimum();
        let away = toward.opposite();
        let _ = sim.send_behavior(BehaviorCommand::new(escape_kind(away), RECOVERY_DISTANCE_M));
        let after = sim.status().clearances.get(toward);
        if let Some(ev) = events {
            ev.emit(Event::RecoveryAttempt {
                task_id: task_id.to_string(),
                attempt: recoveries,
                direction: escape_kind(away).name().to_string(),
                min_clearance_before: before,
                clearance_after: after,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_forms() {
        assert_eq!(
            parse_derived("center between 12C1 and 12C2"),
            Some(DerivedExpr::Midpoint("12C1".into(), "12C2".into()))
        );
        assert_eq!(
            parse_derived("the midpoint between A and B"),
            Some(DerivedExpr::Midpoint("A".into(), "B".into()))
        );
        let Some(DerivedExpr::Offset { meters, toward, label }) = parse_derived("1.5 m north of 12C1") else { panic!() };
        assert_eq!((meters, toward, label.as_str()), (1.5, Point2::new(0.0, 1.0), "12C1"));
        assert!(matches!(parse_derived("2m west of EV1"), Some(DerivedExpr::Offset { .. })));
        assert_eq!(parse_derived("south hallway"), None);
        assert_eq!(parse_derived("1.5 m upward of 12C1"), None);
    }
}
