//! The agent core: turns commands into an ordered task list, applies
//! mid-execution edits, and runs each task through navigation then
//! positioning.

mod task;

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::events::{Event, EventLog};
use crate::geometry::Pose2D;
use crate::navigation::{resolve_destination, supervise_navigation, NavError, NavOutcome, ZoneRegistry};
use crate::positioning::{position_to_target, PositioningConfig, PositioningGoal, PositioningOutcome, PositioningReport};
use crate::reasoning::{Gateway, ReasoningError, TaskEdit};
use crate::sim::Simulator;

pub use task::{FailureReason, Phase, StopChannel, StopReason, StopSignal, Task, TaskList, TaskStatus, TaskView};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommandError {
    #[error("empty command")]
    Empty,
    #[error("command not understood: {0}")]
    Reasoning(#[from] ReasoningError),
    #[error("edit cannot be applied: {0}")]
    Invalid(String),
}

/// Self-judgment after positioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Succeeded,
    Failed(FailureReason),
    /// Stopped for a reissue: neither success nor failure.
    Requeue,
}

/// Success iff positioning completed.
pub fn judge_success(report: &PositioningReport) -> Judgment {
    match report.outcome {
        PositioningOutcome::Completed => Judgment::Succeeded,
        PositioningOutcome::MaxIterations => Judgment::Failed(FailureReason::TargetNotFound),
        PositioningOutcome::Stopped => Judgment::Requeue,
    }
}

/// Terminal record of one executed task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub status: TaskStatus,
    pub failure: Option<FailureReason>,
    pub final_pose: Pose2D,
}

enum Ending {
    Done(TaskStatus, Option<FailureReason>, String),
    Stopped,
}

pub struct AgentCore {
    list: Mutex<TaskList>,
    gateway: Arc<Gateway>,
    registry: ZoneRegistry,
    events: EventLog,
    stop: StopChannel,
    commands: AtomicU32,
    command_lock: Mutex<()>,
    positioning: PositioningConfig,
    deadline: Mutex<Option<f64>>,
}

impl AgentCore {
    pub fn new(gateway: Arc<Gateway>, registry: ZoneRegistry, events: EventLog, positioning: PositioningConfig) -> Self {
        Self {
            list: Mutex::new(TaskList::default()),
            gateway,
            registry,
            events,
            stop: StopChannel::default(),
            commands: AtomicU32::new(0),
            command_lock: Mutex::new(()),
            positioning,
            deadline: Mutex::new(None),
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn registry(&self) -> &ZoneRegistry {
        &self.registry
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn stop_channel(&self) -> &StopChannel {
        &self.stop
    }

    fn lock(&self) -> MutexGuard<'_, TaskList> {
        self.list.lock().expect("task list poisoned")
    }

    pub fn snapshot(&self) -> TaskList {
        self.lock().clone()
    }

    pub fn running_id(&self) -> Option<String> {
        self.lock().running().map(|t| t.id.clone())
    }

    pub fn has_pending(&self) -> bool {
        !self.lock().is_empty()
    }

    /// Simulated time after which running and remaining tasks fail.
    pub fn set_deadline(&self, t: Option<f64>) {
        *self.deadline.lock().expect("deadline poisoned") = t;
    }

    fn past_deadline(&self) -> bool {
        self.deadline.lock().expect("deadline poisoned").is_some_and(|d| self.events.clock().now() >= d - 1e-9)
    }

    /// Parses a command into new tasks (empty list) or one edit (otherwise)
    /// and applies it atomically. Returns the new revision.
    pub fn handle_command(&self, text: &str) -> Result<u64, CommandError> {
        let _serial = self.command_lock.lock().expect("command lock poisoned");
        self.events.emit(Event::CommandReceived { text: text.to_string() });
        let result = self.apply_command(text);
        if let Err(e) = &result {
            self.events.emit(Event::CommandRejected { text: text.to_string(), reason: e.to_string() });
        }
        result
    }

    fn apply_command(&self, text: &str) -> Result<u64, CommandError> {
        if text.trim().is_empty() {
            return Err(CommandError::Empty);
        }
        let index = self.commands.fetch_add(1, Ordering::SeqCst);
        let (briefs, running) = {
            let l = self.lock();
            (l.active().iter().map(Task::brief).collect::<Vec<_>>(), l.running().map(|t| t.id.clone()))
        };
        if briefs.is_empty() {
            let specs = self.gateway.breakdown(text)?;
            let mut l = self.lock();
            let rev = l.bump();
            for spec in specs {
                let t = l.new_task(spec, index);
                self.events.emit(Event::TaskCreated { task: t.clone(), revision: rev });
                l.insert(usize::MAX, t);
            }
            return Ok(rev);
        }
        let edit = self.gateway.modify(text, briefs, running)?;
        let mut l = self.lock();
        self.apply_edit(&mut l, edit, index)
    }

    /// Stops the running task and queues a fresh copy at `at`.
    /// `in_place` keeps the robot where it is, so positioning may resume
    /// directly when the zone is unchanged.
    fn preempt(&self, l: &mut TaskList, at: usize, in_place: bool, change: impl FnOnce(&mut Task), rev: u64) -> String {
        let running = l.running().cloned().expect("preempt needs a running task");
        self.raise_stop(l, &running.id, StopReason::PreemptModify);
        let mut copy = l.new_task(
            crate::reasoning::TaskSpec {
                zone: running.zone_expr.clone(),
                instruction: running.instruction.clone(),
                target: running.target.clone(),
            },
            running.created_by,
        );
        copy.reissued_from = Some(running.id.clone());
        change(&mut copy);
        copy.resume_at = if in_place && copy.zone_expr == running.zone_expr && running.status == TaskStatus::Positioning {
            Phase::Positioning
        } else {
            Phase::Navigation
        };
        let id = copy.id.clone();
        self.events.emit(Event::TaskCreated { task: copy.clone(), revision: rev });
        l.insert(at, copy);
        id
    }

    fn raise_stop(&self, l: &mut TaskList, id: &str, reason: StopReason) {
        if self.stop.raise(StopSignal { task_id: id.to_string(), reason }) {
            self.events.emit(Event::StopSignal { task_id: id.to_string(), reason: reason.as_str().to_string() });
        }
        if let Some(t) = l.get_mut(id) {
            t.stop_requested.get_or_insert(reason);
        }
    }

    fn cancel_pending(&self, l: &mut TaskList, id: &str, reason: &str, rev: u64) {
        if let Some(t) = l.retire(id, TaskStatus::Cancelled, None) {
            self.events.emit(Event::TaskCancelled { task_id: t.id.clone(), reason: reason.to_string(), revision: rev });
            self.events.emit(Event::TaskTerminal {
                task_id: t.id,
                status: TaskStatus::Cancelled,
                reason: None,
                revision: rev,
                final_pose: None,
                odometer: None,
            });
        }
    }

    fn apply_edit(&self, l: &mut TaskList, edit: TaskEdit, index: u32) -> Result<u64, CommandError> {
        let running = l.running().map(|t| t.id.clone());
        let stopping = l.active().first().is_some_and(|t| t.stop_requested.is_some());
        match edit {
            TaskEdit::Append { tasks, front } => {
                let rev = l.bump();
                let mut at = if front { l.front_index() } else { usize::MAX };
                for spec in tasks {
                    let t = l.new_task(spec, index);
                    self.events.emit(Event::TaskCreated { task: t.clone(), revision: rev });
                    l.insert(at, t);
                    at = at.saturating_add(1);
                }
                if front && running.is_some() && !stopping {
                    self.preempt(l, at, false, |_| {}, rev);
                }
                Ok(rev)
            }
            TaskEdit::Cancel { task_id } => {
                let rev = l.bump();
                if Some(&task_id) == running.as_ref() {
                    self.raise_stop(l, &task_id, StopReason::PreemptCancel);
                } else if l.position(&task_id).is_some() {
                    self.cancel_pending(l, &task_id, "cancelled by command", rev);
                } else {
                    return Err(CommandError::Invalid(format!("no active task {task_id}")));
                }
                Ok(rev)
            }
            TaskEdit::Reorder { order } => {
                l.reorder(&order).map_err(CommandError::Invalid)?;
                let rev = l.bump();
                self.events.emit(Event::TasksReordered { order: order.clone(), revision: rev });
                if let Some(run) = running.filter(|_| !stopping) {
                    if order.first() != Some(&run) {
                        // move the running task back to index 0 and requeue a copy where it was put
                        let pos = l.position(&run).expect("running task is active");
                        let mut ids: Vec<String> = l.active().iter().map(|t| t.id.clone()).collect();
                        ids.remove(pos);
                        ids.insert(0, run.clone());
                        l.reorder(&ids).map_err(CommandError::Invalid)?;
                        self.preempt(l, pos + 1, false, |_| {}, rev);
                    }
                }
                Ok(rev)
            }
            TaskEdit::Modify { task_id, zone, instruction, target } => {
                let rev = l.bump();
                let apply = |t: &mut Task| {
                    if let Some(z) = zone.clone() {
                        t.zone_expr = z;
                    }
                    if let Some(i) = instruction.clone() {
                        t.instruction = i;
                    }
                    if let Some(p) = target.clone() {
                        t.target = Some(p);
                    }
                };
                if Some(&task_id) == running.as_ref() {
                    if stopping {
                        return Err(CommandError::Invalid(format!("task {task_id} is already stopping")));
                    }
                    self.preempt(l, 1, true, apply, rev);
                } else {
                    let t = l.get_mut(&task_id).ok_or_else(|| CommandError::Invalid(format!("no active task {task_id}")))?;
                    apply(t);
                    let view = t.clone();
                    self.events.emit(Event::TaskModified { task: view, revision: rev });
                }
                Ok(rev)
            }
        }
    }

    /// Executes the task at the head of the list to a terminal state.
    /// Returns `None` when the list is empty.
    pub fn run_next(&self, sim: &mut Simulator) -> Option<TaskOutcome> {
        let task = {
            let mut l = self.lock();
            let head = l.active().first()?.clone();
            let status = match head.resume_at {
                Phase::Navigation => TaskStatus::Navigating,
                Phase::Positioning => TaskStatus::Positioning,
            };
            let rev = l.bump();
            let t = l.get_mut(&head.id).expect("head is active");
            t.status = status;
            let t = t.clone();
            self.events.emit(Event::TaskStarted { task_id: t.id.clone(), status, revision: rev, odometer: sim.odometer() });
            t
        };

        let ending = if self.past_deadline() {
            Ending::Done(TaskStatus::Failed, Some(FailureReason::TargetNotFound), "session time budget exhausted".into())
        } else {
            self.execute(sim, &task)
        };

        let mut l = self.lock();
        let rev = l.bump();
        let (status, failure) = match ending {
            Ending::Done(status, failure, detail) => {
                tracing::debug!("task {} {}: {detail}", task.id, status.as_str());
                (status, failure)
            }
            Ending::Stopped if self.stop.is_raised(&task.id) => {
                let reason = self.stop.signal_for(&task.id).map(|s| s.reason);
                let why = match reason {
                    Some(StopReason::PreemptCancel) => "cancelled by command",
                    Some(StopReason::Shutdown) => "shutdown",
                    _ => "preempted; reissued",
                };
                self.events.emit(Event::TaskCancelled { task_id: task.id.clone(), reason: why.into(), revision: rev });
                (TaskStatus::Cancelled, None)
            }
            Ending::Stopped => (TaskStatus::Failed, Some(FailureReason::TargetNotFound)),
        };
        l.retire(&task.id, status, failure);
        let final_pose = sim.pose();
        self.events.emit(Event::TaskTerminal {
            task_id: task.id.clone(),
            status,
            reason: failure,
            revision: rev,
            final_pose: Some(final_pose),
            odometer: Some(sim.odometer()),
        });
        Some(TaskOutcome { task_id: task.id, status, failure, final_pose })
    }

    /// Runs tasks until the list is empty.
    pub fn run_all(&self, sim: &mut Simulator) -> Vec<TaskOutcome> {
        std::iter::from_fn(|| self.run_next(sim)).collect()
    }

    fn set_status(&self, id: &str, status: TaskStatus, odometer: f64) {
        let mut l = self.lock();
        let rev = l.bump();
        if let Some(t) = l.get_mut(id) {
            t.status = status;
        }
        self.events.emit(Event::TaskStarted { task_id: id.to_string(), status, revision: rev, odometer });
    }

    fn execute(&self, sim: &mut Simulator, task: &Task) -> Ending {
        let should_stop = || self.stop.is_raised(&task.id) || self.past_deadline();
        let fail = |r: FailureReason, d: String| Ending::Done(TaskStatus::Failed, Some(r), d);

        if task.resume_at == Phase::Navigation {
            let dest = match resolve_destination(&task.zone_expr, &self.registry, &self.gateway, sim.pose().position()) {
                Ok(d) => d,
                Err(NavError::Reasoning(e)) => return fail(FailureReason::Internal, e.to_string()),
                Err(e) => {
                    self.nav_result(&task.id, false, e.to_string());
                    return fail(FailureReason::NavigationFailed, e.to_string());
                }
            };
            self.events.emit(Event::DestinationResolved {
                task_id: task.id.clone(),
                expr: task.zone_expr.clone(),
                method: dest.method,
                position: dest.position,
                labels: dest.labels.clone(),
            });
            match supervise_navigation(sim, dest.position, &task.id, Some(&self.events), &should_stop) {
                NavOutcome::Arrived { recoveries } => {
                    self.nav_result(&task.id, true, format!("arrived after {recoveries} recoveries"));
                }
                NavOutcome::Stopped => {
                    self.nav_result(&task.id, false, "stopped".into());
                    return Ending::Stopped;
                }
                NavOutcome::Failed { reason, detail } => {
                    self.nav_result(&task.id, false, format!("{reason:?}: {detail}").to_lowercase());
                    return fail(FailureReason::NavigationFailed, detail);
                }
            }
            self.set_status(&task.id, TaskStatus::Positioning, sim.odometer());
        }

        let goal = PositioningGoal { task_id: &task.id, instruction: &task.instruction, target: task.target.as_ref() };
        let report = match position_to_target(sim, &self.gateway, goal, &self.positioning, Some(&self.events), &should_stop) {
            Ok(r) => r,
            Err(e) => return fail(FailureReason::Internal, e.to_string()),
        };
        let rev = self.lock().revision();
        self.events.emit(Event::PosResult {
            task_id: task.id.clone(),
            outcome: report.outcome,
            iterations: report.iterations,
            revision: rev,
        });
        match judge_success(&report) {
            Judgment::Succeeded => Ending::Done(TaskStatus::Succeeded, None, "positioning completed".into()),
            Judgment::Failed(r) => fail(r, format!("{} iterations without completion", report.iterations)),
            Judgment::Requeue => Ending::Stopped,
        }
    }

    fn nav_result(&self, id: &str, success: bool, detail: String) {
        let rev = self.lock().revision();
        self.events.emit(Event::NavResult { task_id: id.to_string(), success, detail, revision: rev });
    }
}
