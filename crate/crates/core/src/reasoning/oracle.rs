//! Ground-truth stand-in for the multimodal model: parses the canonical
//! command language, describes labels from geometry, matches queries by
//! keyword overlap and reads positioning verdicts off the observation.

use std::collections::BTreeSet;

use crate::geometry::Point2;
use crate::positioning::{distance_band, Direction, PositioningDecision};
use crate::reasoning::grammar::{parse_command, parse_edit, predicate_refers_to, EditCommand, TaskRef, TaskSentence, Vocabulary};
use crate::reasoning::{
    Backend, LabelCandidate, NeighborLabel, ReasoningError, ReasoningRequest, ReasoningResponse, RequestPayload, TaskBrief,
    TaskEdit, TaskSpec,
};
use crate::sim::{Observation, Region};
use crate::world::{object_matches, RelationGraph, Scenario, TargetPredicate, WorldObject};

/// Minimum fraction of query keywords a description must contain.
pub const SELECT_THRESHOLD: f64 = 0.5;

struct OracleWorld {
    objects: Vec<WorldObject>,
    zones: BTreeSet<String>,
}

impl RelationGraph for OracleWorld {
    fn object(&self, id: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }
    fn objects(&self) -> &[WorldObject] {
        &self.objects
    }
    fn has_zone(&self, name: &str) -> bool {
        self.zones.contains(name)
    }
}

pub struct OracleBackend {
    vocab: Vocabulary,
    world: OracleWorld,
}

impl OracleBackend {
    pub fn new(scenario: &Scenario) -> Self {
        let names = scenario
            .labels
            .iter()
            .map(|l| l.name.clone())
            .chain(scenario.objects.iter().map(|o| o.id.clone()));
        Self {
            vocab: Vocabulary::new(scenario.classes(), names),
            world: OracleWorld {
                objects: scenario.objects.clone(),
                zones: scenario.labels.iter().map(|l| l.name.clone()).collect(),
            },
        }
    }

    fn pos_decide(&self, target: Option<&TargetPredicate>, obs: &Observation) -> Result<PositioningDecision, ReasoningError> {
        let pred = target.ok_or_else(|| ReasoningError::Unintelligible("oracle positioning needs a compiled target".into()))?;
        let hit = obs.frame_objects.iter().find(|f| {
            !f.occluded
                && self
                    .world
                    .object(&f.id)
                    .is_some_and(|o| object_matches(o, pred, &self.world).unwrap_or(false))
        });
        let Some(f) = hit else {
            return Ok(PositioningDecision::not_visible(format!("no visible {} matches {}", pred.class, pred.summary())));
        };
        let direction = match f.region {
            Region::Left => Direction::Left,
            Region::Center => Direction::Center,
            Region::Right => Direction::Right,
        };
        Ok(PositioningDecision::new(
            direction,
            distance_band(f.apparent_distance),
            format!("{} is in the {:?} region at {:.2} m", f.id, f.region, f.apparent_distance).to_lowercase(),
        ))
    }
}

fn spec_of(s: TaskSentence) -> TaskSpec {
    TaskSpec { instruction: s.instruction(), zone: s.zone, target: Some(s.predicate) }
}

fn resolve_ref<'a>(r: &TaskRef, tasks: &'a [TaskBrief], running: Option<&str>) -> Option<&'a TaskBrief> {
    match r {
        TaskRef::First => tasks.first(),
        TaskRef::Last => tasks.last(),
        TaskRef::Current => running.and_then(|id| tasks.iter().find(|t| t.id == id)),
        TaskRef::Zone(z) => tasks.iter().find(|t| t.zone.eq_ignore_ascii_case(z)),
        TaskRef::Target(p) => tasks.iter().find(|t| t.target.as_ref().is_some_and(|tp| predicate_refers_to(p, tp))),
    }
}

fn edit_for(cmd: EditCommand, tasks: &[TaskBrief], running: Option<&str>) -> Result<TaskEdit, ReasoningError> {
    let find = |r: &TaskRef| {
        resolve_ref(r, tasks, running)
            .map(|t| t.id.clone())
            .ok_or_else(|| ReasoningError::Unintelligible(format!("no task matches {r:?}")))
    };
    Ok(match cmd {
        EditCommand::Add { tasks: new, front } => TaskEdit::Append { tasks: new.into_iter().map(spec_of).collect(), front },
        EditCommand::Cancel(r) => TaskEdit::Cancel { task_id: find(&r)? },
        EditCommand::Prioritize(r) => {
            let id = find(&r)?;
            // the running task keeps going; the chosen one runs next
            let mut order: Vec<String> = Vec::new();
            if let Some(run) = running.filter(|run| *run != id) {
                order.push(run.to_string());
            }
            order.push(id.clone());
            let rest: Vec<String> = tasks.iter().map(|t| t.id.clone()).filter(|t| !order.contains(t)).collect();
            order.extend(rest);
            TaskEdit::Reorder { order }
        }
        EditCommand::ReplaceTarget { target_text, predicate, old } => TaskEdit::Modify {
            task_id: find(&old)?,
            zone: None,
            instruction: Some(format!("inspect {target_text}")),
            target: Some(predicate),
        },
        EditCommand::ReplaceZone { zone, old } => TaskEdit::Modify { task_id: find(&old)?, zone: Some(zone), instruction: None, target: None },
    })
}

/// Name of the map ninth containing `p`: `north`, `southwest`, `central`, ...
pub fn nonant_name(p: Point2, min: Point2, max: Point2) -> &'static str {
    let third = |v: f64, lo: f64, hi: f64| {
        let f = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        if f < 1.0 / 3.0 {
            0
        } else if f > 2.0 / 3.0 {
            2
        } else {
            1
        }
    };
    match (third(p.y, min.y, max.y), third(p.x, min.x, max.x)) {
        (2, 0) => "northwest",
        (2, 1) => "north",
        (2, _) => "northeast",
        (1, 0) => "west",
        (1, 1) => "central",
        (1, _) => "east",
        (_, 0) => "southwest",
        (_, 1) => "south",
        _ => "southeast",
    }
}

/// Template description of a label from its kind, map position and nearest
/// neighbors.
pub fn describe_label(name: &str, kind: Option<&str>, position: Point2, min: Point2, max: Point2, neighbors: &[NeighborLabel]) -> String {
    let kind = kind.unwrap_or("zone");
    let article = if kind.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
    let mut s = format!(
        "Location label {name} is {article} {kind} in the {} part of the map.",
        nonant_name(position, min, max)
    );
    if !neighbors.is_empty() {
        let list: Vec<String> = neighbors.iter().map(|n| format!("{} at {:.1} m", n.name, n.distance)).collect();
        s.push_str(&format!(" Nearest labels: {}.", list.join(", ")));
    }
    s
}

const STOPWORDS: [&str; 16] = [
    "the", "a", "an", "of", "to", "in", "at", "on", "and", "is", "part", "map", "location", "label", "labels", "nearest",
];

fn keywords(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for w in text.to_ascii_lowercase().split(|c: char| !c.is_ascii_alphanumeric()) {
        if w.is_empty() || STOPWORDS.contains(&w) {
            continue;
        }
        match w {
            "northwest" | "northeast" | "southwest" | "southeast" => {
                out.insert(w[..5].to_string());
                out.insert(w[5..].to_string());
            }
            _ => {
                out.insert(w.to_string());
            }
        }
    }
    out
}

/// Keyword-overlap selection: score = fraction of query keywords present in
/// a description; best score ≥ [`SELECT_THRESHOLD`] wins, ties go to the
/// label nearest the robot.
pub fn select_label(query: &str, labels: &[LabelCandidate], robot: Point2) -> (Option<String>, String) {
    let q = keywords(query);
    if q.is_empty() {
        return (None, "query has no keywords".into());
    }
    let mut best: Option<(f64, f64, &LabelCandidate)> = None;
    for c in labels {
        let d = keywords(&c.description);
        let score = q.iter().filter(|w| d.contains(*w)).count() as f64 / q.len() as f64;
        let dist = robot.distance(c.position);
        let better = match best {
            None => true,
            Some((s, bd, b)) => score > s || (score == s && (dist < bd || (dist == bd && c.name < b.name))),
        };
        if better {
            best = Some((score, dist, c));
        }
    }
    match best {
        Some((s, _, c)) if s >= SELECT_THRESHOLD => (Some(c.name.clone()), format!("{} matches {:.0}% of the query keywords", c.name, s * 100.0)),
        Some((s, _, c)) => (None, format!("best candidate {} matches only {:.0}% of the query keywords", c.name, s * 100.0)),
        None => (None, "no labels offered".into()),
    }
}

impl Backend for OracleBackend {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn respond(&mut self, req: &ReasoningRequest) -> Result<ReasoningResponse, ReasoningError> {
        let unintelligible = |e: super::grammar::GrammarError| ReasoningError::Unintelligible(e.0);
        match &req.payload {
            RequestPayload::CoreBreakdown { command } => {
                // an "Add:" command arriving once the list has drained is just new work
                let tasks = match parse_command(command, &self.vocab) {
                    Ok(t) => t,
                    Err(e) => match parse_edit(command, &self.vocab) {
                        Ok(EditCommand::Add { tasks, .. }) => tasks,
                        _ => return Err(unintelligible(e)),
                    },
                };
                Ok(ReasoningResponse::CoreBreakdown { tasks: tasks.into_iter().map(spec_of).collect() })
            }
            RequestPayload::CoreModify { command, tasks, running } => {
                let cmd = parse_edit(command, &self.vocab).map_err(unintelligible)?;
                Ok(ReasoningResponse::CoreModify { edit: edit_for(cmd, tasks, running.as_deref())? })
            }
            RequestPayload::NavDescribe { label, kind, position, map_min, map_max, neighbors } => Ok(ReasoningResponse::NavDescribe {
                description: describe_label(label, kind.as_deref(), *position, *map_min, *map_max, neighbors),
            }),
            RequestPayload::NavSelect { query, labels, robot_position } => {
                let (label, reasoning) = select_label(query, labels, *robot_position);
                Ok(ReasoningResponse::NavSelect { label, reasoning })
            }
            RequestPayload::PosDecide { target, observation, .. } => {
                Ok(ReasoningResponse::PosDecide(self.pos_decide(target.as_ref(), observation)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(name: &str, x: f64, y: f64, desc: &str) -> LabelCandidate {
        LabelCandidate { name: name.into(), position: Point2::new(x, y), description: desc.into() }
    }

    #[test]
    fn nonants() {
        let (lo, hi) = (Point2::new(0.0, 0.0), Point2::new(30.0, 30.0));
        assert_eq!(nonant_name(Point2::new(15.0, 1.0), lo, hi), "south");
        assert_eq!(nonant_name(Point2::new(1.0, 29.0), lo, hi), "northwest");
        assert_eq!(nonant_name(Point2::new(15.0, 15.0), lo, hi), "central");
        assert_eq!(nonant_name(Point2::new(29.0, 15.0), lo, hi), "east");
    }

    #[test]
    fn southern_label_description() {
        let d = describe_label("12C4", Some("room"), Point2::new(20.0, 1.0), Point2::new(0.0, 0.0), Point2::new(30.0, 20.0), &[]);
        assert!(d.contains("12C4"));
        assert!(d.contains("south"));
    }

    #[test]
    fn keyword_selection_and_threshold() {
        let labels = vec![
            cand("12H1", 15.0, 1.0, "Location label 12H1 is a hallway in the south part of the map."),
            cand("12H2", 2.0, 10.0, "Location label 12H2 is a hallway in the west part of the map."),
            cand("EV1", 28.0, 18.0, "Location label EV1 is an elevator in the northeast part of the map."),
        ];
        let robot = Point2::new(2.0, 2.0);
        assert_eq!(select_label("the south hallway", &labels, robot).0.as_deref(), Some("12H1"));
        assert_eq!(select_label("elevator", &labels, robot).0.as_deref(), Some("EV1"));
        assert_eq!(select_label("north elevator", &labels, robot).0.as_deref(), Some("EV1"));
        assert_eq!(select_label("loading dock", &labels, robot).0, None);
        // "hallway" alone ties at 100%: nearest wins
        assert_eq!(select_label("hallway", &labels, Point2::new(3.0, 9.0)).0.as_deref(), Some("12H2"));
    }
}
