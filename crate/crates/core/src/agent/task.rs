use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::reasoning::{TaskBrief, TaskSpec};
use crate::world::TargetPredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Navigating,
    Positioning,
    Succeeded,
    Failed,
    Cancelled,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Succeeded | TaskStatus::Failed | TaskStatus::Cancelled)
    }

    pub fn is_running(self) -> bool {
        matches!(self, TaskStatus::Navigating | TaskStatus::Positioning)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Pending => "pending",
            TaskStatus::Navigating => "navigating",
            TaskStatus::Positioning => "positioning",
            TaskStatus::Succeeded => "succeeded",
            TaskStatus::Failed => "failed",
            TaskStatus::Cancelled => "cancelled",
        }
    }
}

/// Why a task failed, grouped by the module that failed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    WrongZoneLabel,
    /// Destination unknown, unreachable or recovery exhausted.
    NavigationFailed,
    TargetNotFound,
    WrongObject,
    DistanceOver1m,
    SelfJudgment,
    Internal,
}

impl FailureReason {
    pub const ALL: [FailureReason; 7] = [
        FailureReason::WrongZoneLabel,
        FailureReason::NavigationFailed,
        FailureReason::TargetNotFound,
        FailureReason::WrongObject,
        FailureReason::DistanceOver1m,
        FailureReason::SelfJudgment,
        FailureReason::Internal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FailureReason::WrongZoneLabel => "Wrong zone label selected",
            FailureReason::NavigationFailed => "Navigation did not reach the destination",
            FailureReason::TargetNotFound => "Failed to find the target (searching until max iterations)",
            FailureReason::WrongObject => "Positioning to other objects, including distractors",
            FailureReason::DistanceOver1m => "Final distance was longer than 1 m",
            FailureReason::SelfJudgment => "The agent did not judge success as success",
            FailureReason::Internal => "Internal module error",
        }
    }

    pub fn module(self) -> &'static str {
        match self {
            FailureReason::WrongZoneLabel | FailureReason::NavigationFailed => "navigation",
            FailureReason::Internal => "internal",
            _ => "positioning",
        }
    }
}

/// Where a (re)issued task starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Navigation,
    Positioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PreemptModify,
    PreemptCancel,
    Shutdown,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::PreemptModify => "preempt_modify",
            StopReason::PreemptCancel => "preempt_cancel",
            StopReason::Shutdown => "shutdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub zone_expr: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetPredicate>,
    pub status: TaskStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureReason>,
    /// Index of the command that created the task (0 = initial command).
    pub created_by: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reissued_from: Option<String>,
    pub resume_at: Phase,
    /// Set when a stop was requested while the task was running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_requested: Option<StopReason>,
}

/// Snapshot form used in events and API responses.
pub type TaskView = Task;

impl Task {
    pub fn brief(&self) -> TaskBrief {
        TaskBrief {
            id: self.id.clone(),
            zone: self.zone_expr.clone(),
            instruction: self.instruction.clone(),
            target: self.target.clone(),
            status: self.status.as_str().to_string(),
        }
    }
}

/// Ordered queue of live tasks (index 0 runs first) plus finished history.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaskList {
    active: Vec<Task>,
    history: Vec<Task>,
    revision: u64,
    next_id: u32,
}

impl TaskList {
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn active(&self) -> &[Task] {
        &self.active
    }

    pub fn history(&self) -> &[Task] {
        &self.history
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// The task currently executing, if any (always at index 0).
    pub fn running(&self) -> Option<&Task> {
        self.active.first().filter(|t| t.status.is_running())
    }

    pub fn get(&self, id: &str) -> Option<&Task> {
        self.active.iter().chain(self.history.iter()).find(|t| t.id == id)
    }

    pub(crate) fn get_mut(&mut self, id: &str) -> Option<&mut Task> {
        self.active.iter_mut().find(|t| t.id == id)
    }

    pub(crate) fn position(&self, id: &str) -> Option<usize> {
        self.active.iter().position(|t| t.id == id)
    }

    pub(crate) fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    pub(crate) fn new_task(&mut self, spec: TaskSpec, created_by: u32) -> Task {
        self.next_id += 1;
        Task {
            id: format!("T{}", self.next_id),
            zone_expr: spec.zone,
            instruction: spec.instruction,
            target: spec.target,
            status: TaskStatus::Pending,
            failure: None,
            created_by,
            reissued_from: None,
            resume_at: Phase::Navigation,
            stop_requested: None,
        }
    }

    pub(crate) fn insert(&mut self, index: usize, task: Task) {
        let index = index.min(self.active.len());
        self.active.insert(index, task);
    }

    /// Moves an active task into history with a terminal status.
    pub(crate) fn retire(&mut self, id: &str, status: TaskStatus, failure: Option<FailureReason>) -> Option<Task> {
        let i = self.position(id)?;
        let mut t = self.active.remove(i);
        t.status = status;
        t.failure = failure;
        self.history.push(t.clone());
        Some(t)
    }

    /// Applies a permutation of active ids; unknown or missing ids are an error.
    pub(crate) fn reorder(&mut self, order: &[String]) -> Result<(), String> {
        if order.len() != self.active.len() {
            return Err("reorder must list every active task".into());
        }
        let mut idx = Vec::with_capacity(order.len());
        for id in order {
            let i = self.position(id).ok_or_else(|| format!("unknown task {id}"))?;
            if idx.contains(&i) {
                return Err(format!("task {id} listed twice"));
            }
            idx.push(i);
        }
        self.active = idx.into_iter().map(|i| self.active[i].clone()).collect();
        Ok(())
    }

    /// Insert point for tasks that must run before everything still queued.
    pub(crate) fn front_index(&self) -> usize {
        usize::from(self.running().is_some())
    }
}

/// A request to stop the running task at its next action boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSignal {
    pub task_id: String,
    pub reason: StopReason,
}

/// Priority channel polled by the navigation and positioning modules.
#[derive(Debug, Clone, Default)]
pub struct StopChannel(Arc<Mutex<Vec<StopSignal>>>);

impl StopChannel {
    /// Returns false when a signal for the same task was already raised.
    pub fn raise(&self, signal: StopSignal) -> bool {
        let mut v = self.0.lock().expect("stop channel poisoned");
        if v.iter().any(|s| s.task_id == signal.task_id) {
            return false;
        }
        v.push(signal);
        true
    }

    pub fn is_raised(&self, task_id: &str) -> bool {
        self.0.lock().expect("stop channel poisoned").iter().any(|s| s.task_id == task_id)
    }

    pub fn signal_for(&self, task_id: &str) -> Option<StopSignal> {
        self.0.lock().expect("stop channel poisoned").iter().find(|s| s.task_id == task_id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(z: &str) -> TaskSpec {
        TaskSpec { zone: z.into(), instruction: "inspect x".into(), target: None }
    }

    #[test]
    fn ids_are_unique_and_sequential() {
        let mut l = TaskList::default();
        let a = l.new_task(spec("A"), 0);
        let b = l.new_task(spec("B"), 0);
        assert_eq!((a.id.as_str(), b.id.as_str()), ("T1", "T2"));
    }

    #[test]
    fn reorder_checks_permutation() {
        let mut l = TaskList::default();
        for z in ["A", "B", "C"] {
            let t = l.new_task(spec(z), 0);
            l.insert(usize::MAX, t);
        }
        assert!(l.reorder(&["T3".into(), "T1".into()]).is_err());
        l.reorder(&["T3".into(), "T1".into(), "T2".into()]).unwrap();
        let ids: Vec<&str> = l.active().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["T3", "T1", "T2"]);
    }

    #[test]
    fn duplicate_stop_is_ignored() {
        let ch = StopChannel::default();
        let s = StopSignal { task_id: "T1".into(), reason: StopReason::PreemptCancel };
        assert!(ch.raise(s.clone()));
        assert!(!ch.raise(StopSignal { reason: StopReason::PreemptModify, ..s }));
        assert_eq!(ch.signal_for("T1").unwrap().reason, StopReason::PreemptCancel);
        assert!(!ch.is_raised("T2"));
    }
}
