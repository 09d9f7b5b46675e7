//! Append-only session event log. Every module reports through it; all
//! reports are derived from it after the fact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{FailureReason, TaskStatus, TaskView};
use crate::geometry::{Point2, Pose2D};
use crate::navigation::ResolutionMethod;
use crate::positioning::{PositioningOutcome, TraceEntry};
use crate::sim::RobotStatus;

/// Simulated clock shared by everything that stamps events.
#[derive(Debug, Clone, Default)]
pub struct SimClock(Arc<AtomicU64>);

impl SimClock {
    pub fn now(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }

    pub fn set(&self, t: f64) {
        self.0.store(t.to_bits(), Ordering::Release);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Event {
    SessionStarted {
        session: String,
        suite: Option<String>,
        odometer: f64,
    },
    CommandReceived {
        text: String,
    },
    CommandRejected {
        text: String,
        reason: String,
    },
    Status(RobotStatus),
    TaskCreated {
        task: TaskView,
        revision: u64,
    },
    TaskModified {
        task: TaskView,
        revision: u64,
    },
    TaskCancelled {
        task_id: String,
        reason: String,
        revision: u64,
    },
    TasksReordered {
        order: Vec<String>,
        revision: u64,
    },
    StopSignal {
        task_id: String,
        reason: String,
    },
    TaskStarted {
        task_id: String,
        status: TaskStatus,
        revision: u64,
        odometer: f64,
    },
    DestinationResolved {
        task_id: String,
        expr: String,
        method: ResolutionMethod,
        position: Point2,
        labels: Vec<String>,
    },
    RecoveryAttempt {
        task_id: String,
        attempt: u32,
        direction: String,
        min_clearance_before: f64,
        clearance_after: f64,
    },
    NavResult {
        task_id: String,
        success: bool,
        detail: String,
        revision: u64,
    },
    PositioningStep {
        task_id: String,
        #[serde(flatten)]
        entry: TraceEntry,
    },
    PosResult {
        task_id: String,
        outcome: PositioningOutcome,
        iterations: u32,
        revision: u64,
    },
    TaskTerminal {
        task_id: String,
        status: TaskStatus,
        reason: Option<FailureReason>,
        revision: u64,
        /// Absent for tasks cancelled before they ran.
        final_pose: Option<Pose2D>,
        odometer: Option<f64>,
    },
    BehaviorIssued {
        command: String,
    },
    BehaviorRejected {
        command: String,
        reason: String,
    },
    TaskEvaluated {
        task_id: String,
        evaluation: serde_json::Value,
    },
    SessionEvaluated {
        session: String,
        summary: serde_json::Value,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::SessionStarted { .. } => "session_started",
            Event::CommandReceived { .. } => "command_received",
            Event::CommandRejected { .. } => "command_rejected",
            Event::Status(_) => "status",
            Event::TaskCreated { .. } => "task_created",
            Event::TaskModified { .. } => "task_modified",
            Event::TaskCancelled { .. } => "task_cancelled",
            Event::TasksReordered { .. } => "tasks_reordered",
            Event::StopSignal { .. } => "stop_signal",
            Event::TaskStarted { .. } => "task_started",
            Event::DestinationResolved { .. } => "destination_resolved",
            Event::RecoveryAttempt { .. } => "recovery_attempt",
            Event::NavResult { .. } => "nav_result",
            Event::PositioningStep { .. } => "positioning_step",
            Event::PosResult { .. } => "pos_result",
            Event::TaskTerminal { .. } => "task_terminal",
            Event::BehaviorIssued { .. } => "behavior_issued",
            Event::BehaviorRejected { .. } => "behavior_rejected",
            Event::TaskEvaluated { .. } => "task_evaluated",
            Event::SessionEvaluated { .. } => "session_evaluated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(flatten)]
    pub event: Event,
}

type Listener = Box<dyn Fn(&EventRecord) + Send + Sync>;

struct Inner {
    records: Vec<EventRecord>,
    next_seq: u64,
    session: Option<String>,
    writer: Option<BufWriter<File>>,
    listeners: Vec<Listener>,
    hasher: Sha256,
    keep_status: bool,
}

/// Shared handle to the log. Cheap to clone.
#[derive(Clone)]
pub struct EventLog {
    inner: Arc<Mutex<Inner>>,
    clock: SimClock,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog").field("len", &self.len()).finish()
    }
}

impl EventLog {
    pub fn new(clock: SimClock) -> Self {
        Self {
            inner: Arc::new(Mutex::new(Inner {
                records: Vec::new(),
                next_seq: 0,
                session: None,
                writer: None,
                listeners: Vec::new(),
                hasher: Sha256::new(),
                keep_status: true,
            })),
            clock,
        }
    }

    /// Also append every record as one JSON line to `path`.
    pub fn with_file(self, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let f = File::create(path)?;
        self.inner.lock().expect("event log poisoned").writer = Some(BufWriter::new(f));
        Ok(self)
    }

    /// Drop per-tick status records from the in-memory copy (they still go to
    /// the file, listeners and digest).
    pub fn retain_status_in_memory(&self, keep: bool) {
        self.inner.lock().expect("event log poisoned").keep_status = keep;
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn set_session(&self, session: Option<String>) {
        self.inner.lock().expect("event log poisoned").session = session;
    }

    pub fn subscribe(&self, listener: impl Fn(&EventRecord) + Send + Sync + 'static) {
        self.inner.lock().expect("event log poisoned").listeners.push(Box::new(listener));
    }

    pub fn emit(&self, event: Event) {
        let mut inner = self.inner.lock().expect("event log poisoned");
        let record = EventRecord {
            seq: inner.next_seq,
            sim_time: self.clock.now(),
            session: inner.session.clone(),
            event,
        };
        inner.next_seq += 1;
        let line = serde_json::to_string(&record).expect("event records serialize");
        inner.hasher.update(line.as_bytes());
        inner.hasher.update(b"\n");
        if let Some(w) = inner.writer.as_mut() {
            // a failing log file must not take the robot down
            if let Err(e) = writeln!(w, "{line}") {
                tracing::warn!("event log write failed: {e}");
            }
        }
        for l in &inner.listeners {
            l(&record);
        }
        if inner.keep_status || !matches!(record.event, Event::Status(_)) {
            inner.records.push(record);
        }
    }

    pub fn flush(&self) -> std::io::Result<()> {
        match self.inner.lock().expect("event log poisoned").writer.as_mut() {
            Some(w) => w.flush(),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("event log poisoned").next_seq as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.inner.lock().expect("event log poisoned").records.clone()
    }

    pub fn records_since(&self, seq: u64) -> Vec<EventRecord> {
        let inner = self.inner.lock().expect("event log poisoned");
        let start = inner.records.partition_point(|r| r.seq < seq);
        inner.records[start..].to_vec()
    }

    /// SHA-256 over every emitted line, in order.
    pub fn digest(&self) -> String {
        hex::encode(self.inner.lock().expect("event log poisoned").hasher.clone().finalize())
    }
}

/// Digest of a record sequence, identical to [`EventLog::digest`] for the
/// same records.
pub fn digest_records(records: &[EventRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_string(r).expect("event records serialize").as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Reads a line-delimited event log.
pub fn read_log(path: impl AsRef<Path>) -> std::io::Result<Vec<EventRecord>> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Clearances, NavState};

    #[test]
    fn records_round_trip_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        let clock = SimClock::default();
        let log = EventLog::new(clock.clone()).with_file(&path).unwrap();
        log.set_session(Some("S1".into()));
        log.emit(Event::SessionStarted { session: "S1".into(), suite: Some("A".into()), odometer: 0.0 });
        clock.set(0.1);
        log.emit(Event::Status(RobotStatus {
            sim_time: 0.1,
            pose: Pose2D::new(1.0, 2.0, 90.0),
            clearances: Clearances::default(),
            nav_state: NavState::Idle,
            odometer: 0.0,
            blocked_reason: None,
        }));
        log.emit(Event::StopSignal { task_id: "T1".into(), reason: "preempt_cancel".into() });
        log.flush().unwrap();
        let back = read_log(&path).unwrap();
        assert_eq!(back, log.records());
        assert_eq!(digest_records(&back), log.digest());
    }

    #[test]
    fn status_can_be_dropped_from_memory_only() {
        let log = EventLog::new(SimClock::default());
        log.retain_status_in_memory(false);
        log.emit(Event::BehaviorIssued { command: "stop".into() });
        log.emit(Event::Status(RobotStatus {
            sim_time: 0.0,
            pose: Pose2D::new(0.0, 0.0, 0.0),
            clearances: Clearances::default(),
            nav_state: NavState::Idle,
            odometer: 0.0,
            blocked_reason: None,
        }));
        assert_eq!(log.len(), 2);
        assert_eq!(log.records().len(), 1);
    }
}
