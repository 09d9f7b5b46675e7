use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{Point2, Pose2D};
use crate::session::{parse_task_ref, sentence_count, SessionScript};
use crate::world::grid::OccupancyGrid;
use crate::world::objects::{RelationGraph, Relations, WorldObject};
use crate::world::transform::{ControlPoint, DrawingTransform};
use crate::world::WorldError;

/// A drawing label after its pixel position has been mapped to the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneLabel {
    pub name: String,
    pub drawing_pos: Point2,
    pub world_pos: Point2,
    /// What the label denotes on the drawing (room, hallway, stairway, ...).
    pub kind: Option<String>,
    /// Scripted description; generated during registry preparation when absent.
    pub description: Option<String>,
}

/// A validated, immutable world loaded from a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub suite: Option<String>,
    pub grid: OccupancyGrid,
    pub transform: DrawingTransform,
    /// Largest control-point residual when the transform was fitted.
    pub transform_residual: Option<f64>,
    pub labels: Vec<ZoneLabel>,
    pub objects: Vec<WorldObject>,
    /// Objects that never move under seeded placement jitter.
    pub anchored: BTreeSet<String>,
    pub placement_jitter_m: f64,
    pub robot_start: Pose2D,
    pub sessions: Vec<SessionScript>,
    pub drawing: Option<String>,
    pub source: Option<PathBuf>,
    /// SHA-256 of the file bytes the scenario was parsed from.
    pub digest: String,
}

// ---- file schema ----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub suite: Option<String>,
    pub grid: GridSection,
    pub transform: TransformSection,
    #[serde(default)]
    pub drawing: Option<String>,
    pub labels: Vec<LabelEntry>,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
    pub robot_start: StartEntry,
    #[serde(default)]
    pub placement_jitter_m: f64,
    #[serde(default)]
    pub sessions: Vec<SessionScript>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub rows: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSection {
    Affine { linear: [[f64; 2]; 2], translation: [f64; 2] },
    ControlPoints(Vec<ControlPoint>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub name: String,
    pub px: f64,
    pub py: f64,
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub relations: Relations,
    pub pose: [f64; 2],
    #[serde(default = "default_footprint")]
    pub footprint_radius: f64,
    #[serde(default)]
    pub solid: bool,
    #[serde(default)]
    pub anchored: bool,
}

fn default_footprint() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartEntry {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
}

// ---- loading --------------------------------------------------------------

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, WorldError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
    let mut scenario = parse_scenario(&bytes)?;
    scenario.source = Some(path.to_path_buf());
    Ok(scenario)
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, WorldError> {
    let file: ScenarioFile = serde_json::from_slice(bytes).map_err(|e| WorldError::Parse(e.to_string()))?;
    let digest = hex::encode(Sha256::digest(bytes));
    Scenario::from_file(file, digest)
}

impl Scenario {
    pub fn from_file(file: ScenarioFile, digest: String) -> Result<Self, WorldError> {
        let grid = OccupancyGrid::from_rows(
            &file.grid.rows,
            file.grid.resolution,
            Point2::new(file.grid.origin[0], file.grid.origin[1]),
        )?;

        let (transform, transform_residual) = match &file.transform {
            TransformSection::Affine { linear, translation } => (DrawingTransform::new(*linear, *translation)?, None),
            TransformSection::ControlPoints(points) => {
                let (t, r) = DrawingTransform::fit_control_points(points)?;
                (t, Some(r))
            }
        };

        let mut names = HashSet::new();
        let mut labels = Vec::with_capacity(file.labels.len());
        for l in &file.labels {
            if l.name.trim().is_empty() {
                return Err(WorldError::Validation("label with empty name".into()));
            }
            if !names.insert(l.name.clone()) {
                return Err(WorldError::Validation(format!("duplicate label {:?}", l.name)));
            }
            let drawing_pos = Point2::new(l.px, l.py);
            labels.push(ZoneLabel {
                name: l.name.clone(),
                drawing_pos,
                world_pos: transform.drawing_to_world(drawing_pos),
                kind: l.kind.clone(),
                description: l.description.clone(),
            });
        }

        let mut ids = HashSet::new();
        let mut anchored = BTreeSet::new();
        let mut objects = Vec::with_capacity(file.objects.len());
        for o in &file.objects {
            if !ids.insert(o.id.clone()) {
                return Err(WorldError::Validation(format!("duplicate object id {:?}", o.id)));
            }
            if names.contains(&o.id) {
                return Err(WorldError::Validation(format!("object id {:?} collides with a label name", o.id)));
            }
            if !(o.footprint_radius >= 0.0) {
                return Err(WorldError::Validation(format!("object {:?} has negative footprint radius", o.id)));
            }
            let pose = Point2::new(o.pose[0], o.pose[1]);
            if !grid.is_free_at(pose) {
                return Err(WorldError::Validation(format!("object {:?} is not on a free cell", o.id)));
            }
            if o.anchored {
                anchored.insert(o.id.clone());
            }
            objects.push(WorldObject {
                id: o.id.clone(),
                class: o.class.clone(),
                attributes: o.attributes.iter().cloned().collect(),
                relations: o.relations.clone(),
                pose,
                footprint_radius: o.footprint_radius,
                solid: o.solid,
            });
        }
        for o in &objects {
            for r in o.relations.references() {
                if !ids.contains(r) && !names.contains(r) {
                    return Err(WorldError::Validation(format!(
                        "object {:?} references unknown object or zone {r:?}",
                        o.id
                    )));
                }
            }
        }

        let robot_start = Pose2D::new(file.robot_start.x, file.robot_start.y, file.robot_start.heading);
        if !grid.is_free_at(robot_start.position()) {
            return Err(WorldError::Validation("robot start pose is on an occupied cell".into()));
        }
        if !(file.placement_jitter_m >= 0.0) {
            return Err(WorldError::Validation("placement_jitter_m must be >= 0".into()));
        }

        let mut session_ids = HashSet::new();
        for s in &file.sessions {
            validate_session(s, &ids)?;
            if !session_ids.insert(s.id.clone()) {
                return Err(WorldError::Validation(format!("duplicate session id {:?}", s.id)));
            }
        }

        Ok(Scenario {
            name: file.name,
            suite: file.suite,
            grid,
            transform,
            transform_residual,
            labels,
            objects,
            anchored,
            placement_jitter_m: file.placement_jitter_m,
            robot_start,
            sessions: file.sessions,
            drawing: file.drawing,
            source: None,
            digest,
        })
    }

    pub fn label(&self, name: &str) -> Option<&ZoneLabel> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn session(&self, id: &str) -> Option<&SessionScript> {
        self.sessions.iter().find(|s| s.id == id)
    }

    /// The objects present during `session`.
    pub fn session_objects(&self, session: &SessionScript) -> Vec<WorldObject> {
        match &session.objects {
            Some(ids) => self.objects.iter().filter(|o| ids.contains(&o.id)).cloned().collect(),
            None => self.objects.clone(),
        }
    }

    /// Every class name used by objects, for the command grammar's vocabulary.
    pub fn classes(&self) -> BTreeSet<String> {
        self.objects.iter().map(|o| o.class.clone()).collect()
    }
}

fn validate_session(s: &SessionScript, object_ids: &HashSet<String>) -> Result<(), WorldError> {
    let err = |m: String| WorldError::Validation(format!("session {:?}: {m}", s.id));
    if s.command.trim().is_empty() {
        return Err(err("empty initial command".into()));
    }
    if s.expected_order.is_empty() || s.expected_order.len() > 3 {
        return Err(err(format!("must contain 1 to 3 tasks, found {}", s.expected_order.len())));
    }
    if let Some(objs) = &s.objects {
        if let Some(o) = objs.iter().find(|o| !object_ids.contains(*o)) {
            return Err(err(format!("unknown object {o:?} in the session object list")));
        }
    }
    for (i, e) in s.expected_order.iter().enumerate() {
        if e.task_index != i {
            return Err(err(format!("expected_order index {} out of sequence", e.task_index)));
        }
        let present = s.objects.as_ref().is_none_or(|o| o.contains(&e.target));
        if !object_ids.contains(&e.target) || !present {
            return Err(err(format!("expected target {:?} is not an object", e.target)));
        }
    }
    // Tasks that can exist by the time each trigger fires: the initial
    // sentences plus one per earlier mid-execution command.
    let mut known = sentence_count(&s.command) as u32;
    for m in &s.mid_commands {
        if m.text.trim().is_empty() {
            return Err(err("empty mid-execution command".into()));
        }
        if let Some(r) = m.trigger.task_ref() {
            let n = parse_task_ref(r).ok_or_else(|| err(format!("bad task reference {r:?}")))?;
            if n > known {
                return Err(err(format!("trigger references {r} before it can exist")));
            }
        }
        known += sentence_count(&m.text).max(1) as u32 + 1;
    }
    Ok(())
}

impl RelationGraph for Scenario {
    fn object(&self, id: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn objects(&self) -> &[WorldObject] {
        &self.objects
    }

    fn has_zone(&self, name: &str) -> bool {
        self.labels.iter().any(|l| l.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> serde_json::Value {
        json!({
            "name": "minimal",
            "grid": { "resolution": 1.0, "origin": [0.0, 0.0], "rows": vec![".........."; 10] },
            "transform": { "affine": { "linear": [[1.0, 0.0], [0.0, 1.0]], "translation": [0.0, 0.0] } },
            "labels": [ { "name": "12C4", "px": 5.0, "py": 1.0 } ],
            "objects": [ { "id": "tb1", "class": "toolbox", "attributes": ["open"], "pose": [5.5, 5.5] } ],
            "robot_start": { "x": 1.5, "y": 1.5 }
        })
    }

    fn load(v: &serde_json::Value) -> Result<Scenario, WorldError> {
        parse_scenario(&serde_json::to_vec(v).unwrap())
    }

    #[test]
    fn minimal_scenario_loads() {
        let s = load(&minimal()).unwrap();
        assert_eq!(s.labels.len(), 1);
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.grid.width(), 10);
        assert_eq!(s.robot_start.position(), Point2::new(1.5, 1.5));
    }

    #[test]
    fn dangling_relation_names_the_id() {
        let mut v = minimal();
        v["objects"][0]["relations"] = json!({ "carried_by": "cart_7" });
        let err = load(&v).unwrap_err();
        assert!(matches!(err, WorldError::Validation(_)));
        assert!(err.to_string().contains("cart_7"), "{err}");
    }

    #[test]
    fn start_on_occupied_cell_rejected() {
        let mut v = minimal();
        let mut rows = vec![".........."; 10];
        rows[8] = ".#........";
        v["grid"]["rows"] = json!(rows);
        let err = load(&v).unwrap_err();
        assert!(err.to_string().contains("robot start"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v = minimal();
        v["colour"] = json!("blue");
        assert!(matches!(load(&v).unwrap_err(), WorldError::Parse(_)));
        let mut v = minimal();
        v["objects"][0]["weight"] = json!(3);
        assert!(matches!(load(&v).unwrap_err(), WorldError::Parse(_)));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(parse_scenario(b"{ not json").unwrap_err(), WorldError::Parse(_)));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut v = minimal();
        v["labels"] = json!([{ "name": "A", "px": 1.0, "py": 1.0 }, { "name": "A", "px": 2.0, "py": 2.0 }]);
        assert!(load(&v).unwrap_err().to_string().contains("duplicate label"));
    }

    #[test]
    fn session_trigger_must_reference_existing_task() {
        let mut v = minimal();
        v["sessions"] = json!([{
            "id": "s1",
            "command": "Move to 12C4 and inspect the toolbox.",
            "mid_commands": [ { "trigger": { "after_task": "T4" }, "text": "Cancel the last task." } ],
            "expected_order": [ { "task_index": 0, "target": "tb1" } ]
        }]);
        assert!(load(&v).unwrap_err().to_string().contains("T4"));
    }

    #[test]
    fn loading_is_pure() {
        let bytes = serde_json::to_vec(&minimal()).unwrap();
        assert_eq!(parse_scenario(&bytes).unwrap(), parse_scenario(&bytes).unwrap());
    }
}
