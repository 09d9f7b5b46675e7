//! Single entry point for every "reasoning" call made by the agent core,
//! the navigation module and the positioning loop. Backends are swappable.

pub mod grammar;
mod noise;
mod oracle;
pub mod prompts;
mod remote;
mod transcript;

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::Point2;
use crate::positioning::PositioningDecision;
use crate::sim::Observation;
use crate::world::TargetPredicate;

pub use noise::NoiseBackend;
pub use oracle::{describe_label, nonant_name, select_label, OracleBackend, SELECT_THRESHOLD};
pub use remote::{extract_fenced_json, RemoteBackend, RemoteConfig};
pub use transcript::{load_transcript, ReplayBackend, TranscriptRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningRole {
    CoreBreakdown,
    CoreModify,
    NavDescribe,
    NavSelect,
    PosDecide,
}

impl ReasoningRole {
    pub const ALL: [ReasoningRole; 5] = [
        ReasoningRole::CoreBreakdown,
        ReasoningRole::CoreModify,
        ReasoningRole::NavDescribe,
        ReasoningRole::NavSelect,
        ReasoningRole::PosDecide,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningRole::CoreBreakdown => "core_breakdown",
            ReasoningRole::CoreModify => "core_modify",
            ReasoningRole::NavDescribe => "nav_describe",
            ReasoningRole::NavSelect => "nav_select",
            ReasoningRole::PosDecide => "pos_decide",
        }
    }
}

/// A task as shown to `core_modify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBrief {
    pub id: String,
    pub zone: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetPredicate>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborLabel {
    pub name: String,
    pub position: Point2,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCandidate {
    pub name: String,
    pub position: Point2,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum RequestPayload {
    CoreBreakdown {
        command: String,
    },
    CoreModify {
        command: String,
        tasks: Vec<TaskBrief>,
        running: Option<String>,
    },
    NavDescribe {
        label: String,
        kind: Option<String>,
        position: Point2,
        map_min: Point2,
        map_max: Point2,
        neighbors: Vec<NeighborLabel>,
    },
    NavSelect {
        query: String,
        labels: Vec<LabelCandidate>,
        robot_position: Point2,
    },
    PosDecide {
        instruction: String,
        target: Option<TargetPredicate>,
        observation: Observation,
    },
}

impl RequestPayload {
    pub fn role(&self) -> ReasoningRole {
        match self {
            RequestPayload::CoreBreakdown { .. } => ReasoningRole::CoreBreakdown,
            RequestPayload::CoreModify { .. } => ReasoningRole::CoreModify,
            RequestPayload::NavDescribe { .. } => ReasoningRole::NavDescribe,
            RequestPayload::NavSelect { .. } => ReasoningRole::NavSelect,
            RequestPayload::PosDecide { .. } => ReasoningRole::PosDecide,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("payloads serialize");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRequest {
    pub id: String,
    pub payload: RequestPayload,
}

/// One task produced by a breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub zone: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetPredicate>,
}

/// One atomic change to the task list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TaskEdit {
    /// Add tasks at the end, or ahead of everything (preempting the running
    /// task) when `front` is set.
    Append {
        tasks: Vec<TaskSpec>,
        #[serde(default)]
        front: bool,
    },
    Cancel {
        task_id: String,
    },
    /// New execution order: a permutation of the listed task ids.
    Reorder {
        order: Vec<String>,
    },
    Modify {
        task_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zone: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instruction: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<TargetPredicate>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ReasoningResponse {
    CoreBreakdown { tasks: Vec<TaskSpec> },
    CoreModify { edit: TaskEdit },
    NavDescribe { description: String },
    NavSelect { label: Option<String>, reasoning: String },
    PosDecide(PositioningDecision),
}

impl ReasoningResponse {
    pub fn role(&self) -> ReasoningRole {
        match self {
            ReasoningResponse::CoreBreakdown { .. } => ReasoningRole::CoreBreakdown,
            ReasoningResponse::CoreModify { .. } => ReasoningRole::CoreModify,
            ReasoningResponse::NavDescribe { .. } => ReasoningRole::NavDescribe,
            ReasoningResponse::NavSelect { .. } => ReasoningRole::NavSelect,
            ReasoningResponse::PosDecide(_) => ReasoningRole::PosDecide,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReasoningError {
    #[error("reasoning backend timed out after {0} s")]
    Timeout(f64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("response violates the {role} schema: {detail}")]
    Schema { role: &'static str, detail: String },
    #[error("no recorded response for {role} request {id}{detail}")]
    ReplayMiss { role: &'static str, id: String, detail: String },
    #[error("cannot interpret request: {0}")]
    Unintelligible(String),
    #[error("transcript i/o: {0}")]
    Io(String),
}

impl ReasoningError {
    fn retryable(&self) -> bool {
        matches!(self, ReasoningError::Schema { .. })
    }
}

/// Produces a response for a request. Implementations need not validate;
/// the gateway does.
pub trait Backend: Send {
    fn name(&self) -> &'static str;
    fn respond(&mut self, req: &ReasoningRequest) -> Result<ReasoningResponse, ReasoningError>;
}

/// Checks a response against its request's role schema.
pub fn validate_response(payload: &RequestPayload, resp: &ReasoningResponse) -> Result<(), String> {
    if payload.role() != resp.role() {
        return Err(format!("expected a {} response, got {}", payload.role().as_str(), resp.role().as_str()));
    }
    let task_ok = |t: &TaskSpec| -> Result<(), String> {
        if t.zone.trim().is_empty() || t.instruction.trim().is_empty() {
            return Err("task with empty zone or instruction".into());
        }
        if let Some(p) = &t.target {
            p.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    };
    match (payload, resp) {
        (_, ReasoningResponse::CoreBreakdown { tasks }) => {
            if tasks.is_empty() {
                return Err("breakdown produced no tasks".into());
            }
            tasks.iter().try_for_each(task_ok)
        }
        (RequestPayload::CoreModify { tasks, .. }, ReasoningResponse::CoreModify { edit }) => {
            let known = |id: &str| tasks.iter().any(|t| t.id == id);
            match edit {
                TaskEdit::Append { tasks: new, .. } => {
                    if new.is_empty() {
                        return Err("append without tasks".into());
                    }
                    new.iter().try_for_each(task_ok)
                }
                TaskEdit::Cancel { task_id } if !known(task_id) => Err(format!("unknown task {task_id}")),
                TaskEdit::Cancel { .. } => Ok(()),
                TaskEdit::Reorder { order } => {
                    let mut a: Vec<&str> = order.iter().map(String::as_str).collect();
                    let mut b: Vec<&str> = tasks.iter().map(|t| t.id.as_str()).collect();
                    a.sort_unstable();
                    b.sort_unstable();
                    if a == b {
                        Ok(())
                    } else {
                        Err("reorder is not a permutation of the task list".into())
                    }
                }
                TaskEdit::Modify { task_id, zone, instruction, target } => {
                    if !known(task_id) {
                        return Err(format!("unknown task {task_id}"));
                    }
                    if zone.is_none() && instruction.is_none() && target.is_none() {
                        return Err("modify changes nothing".into());
                    }
                    if let Some(p) = target {
                        p.validate().map_err(|e| e.to_string())?;
                    }
                    Ok(())
                }
            }
        }
        (_, ReasoningResponse::NavDescribe { description }) => {
            if description.trim().is_empty() {
                Err("empty description".into())
            } else {
                Ok(())
            }
        }
        (RequestPayload::NavSelect { labels, .. }, ReasoningResponse::NavSelect { label, .. }) => match label {
            Some(l) if !labels.iter().any(|c| &c.name == l) => Err(format!("label {l:?} was not offered")),
            _ => Ok(()),
        },
        (_, ReasoningResponse::PosDecide(d)) => d.validate(),
        _ => Err("payload and response disagree".into()),
    }
}

struct GatewayState {
    session: String,
    counters: BTreeMap<ReasoningRole, u64>,
    totals: BTreeMap<ReasoningRole, u64>,
    transcript: Vec<TranscriptRecord>,
}

/// Dispatches requests to a backend, validates responses (one retry on a
/// schema violation) and keeps a transcript of every validated exchange.
pub struct Gateway {
    backend: Mutex<Box<dyn Backend>>,
    state: Mutex<GatewayState>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("backend", &self.backend_name()).finish()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self {
            backend: Mutex::new(backend),
            state: Mutex::new(GatewayState {
                session: "default".into(),
                counters: BTreeMap::new(),
                totals: BTreeMap::new(),
                transcript: Vec::new(),
            }),
        }
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.lock().expect("gateway poisoned").name()
    }

    /// Request ids restart for each session: `<session>:<role>:<n>`.
    pub fn begin_session(&self, session: &str) {
        let mut st = self.state.lock().expect("gateway poisoned");
        st.session = session.to_string();
        st.counters.clear();
    }

    /// Requests issued for `role` since construction.
    pub fn request_count(&self, role: ReasoningRole) -> u64 {
        self.state.lock().expect("gateway poisoned").totals.get(&role).copied().unwrap_or(0)
    }

    pub fn transcript(&self) -> Vec<TranscriptRecord> {
        self.state.lock().expect("gateway poisoned").transcript.clone()
    }

    pub fn save_transcript(&self, path: impl AsRef<std::path::Path>) -> Result<(), ReasoningError> {
        transcript::write_transcript(path.as_ref(), &self.transcript())
    }

    pub fn reason(&self, payload: RequestPayload) -> Result<ReasoningResponse, ReasoningError> {
        let role = payload.role();
        let id = {
            let mut st = self.state.lock().expect("gateway poisoned");
            let n = {
                let c = st.counters.entry(role).or_insert(0);
                *c += 1;
                *c
            };
            let id = format!("{}:{}:{}", st.session, role.as_str(), n);
            *st.totals.entry(role).or_insert(0) += 1;
            id
        };
        let req = ReasoningRequest { id, payload };
        let mut backend = self.backend.lock().expect("gateway poisoned");
        let mut attempt = 0;
        let resp = loop {
            attempt += 1;
            let outcome = backend.respond(&req).and_then(|r| {
                validate_response(&req.payload, &r)
                    .map(|()| r)
                    .map_err(|detail| ReasoningError::Schema { role: role.as_str(), detail })
            });
            match outcome {
                Ok(r) => break r,
                Err(e) if e.retryable() && attempt < 2 => {
                    tracing::warn!("retrying {}: {e}", req.id);
                }
                Err(e) => return Err(e),
            }
        };
        drop(backend);
        let record = TranscriptRecord {
            role,
            request_id: req.id.clone(),
            request_digest: req.payload.digest(),
            response: resp.clone(),
        };
        self.state.lock().expect("gateway poisoned").transcript.push(record);
        Ok(resp)
    }

    pub fn breakdown(&self, command: &str) -> Result<Vec<TaskSpec>, ReasoningError> {
        match self.reason(RequestPayload::CoreBreakdown { command: command.to_string() })? {
            ReasoningResponse::CoreBreakdown { tasks } => Ok(tasks),
            _ => unreachable!("validated role"),
        }
    }

    pub fn modify(&self, command: &str, tasks: Vec<TaskBrief>, running: Option<String>) -> Result<TaskEdit, ReasoningError> {
        match self.reason(RequestPayload::CoreModify { command: command.to_string(), tasks, running })? {
            ReasoningResponse::CoreModify { edit } => Ok(edit),
            _ => unreachable!("validated role"),
        }
    }

    pub fn describe(&self, payload: RequestPayload) -> Result<String, ReasoningError> {
        match self.reason(payload)? {
            ReasoningResponse::NavDescribe { description } => Ok(description),
            other => Err(ReasoningError::Schema { role: "nav_describe", detail: format!("got {:?}", other.role()) }),
        }
    }

    pub fn select(&self, query: &str, labels: Vec<LabelCandidate>, robot_position: Point2) -> Result<Option<String>, ReasoningError> {
        match self.reason(RequestPayload::NavSelect { query: query.to_string(), labels, robot_position })? {
            ReasoningResponse::NavSelect { label, .. } => Ok(label),
            _ => unreachable!("validated role"),
        }
    }

    pub fn pos_decide(
        &self,
        instruction: &str,
        target: Option<&TargetPredicate>,
        observation: &Observation,
    ) -> Result<PositioningDecision, ReasoningError> {
        let payload = RequestPayload::PosDecide {
            instruction: instruction.to_string(),
            target: target.cloned(),
            observation: observation.clone(),
        };
        match self.reason(payload)? {
            ReasoningResponse::PosDecide(d) => Ok(d),
            _ => unreachable!("validated role"),
        }
    }
}
