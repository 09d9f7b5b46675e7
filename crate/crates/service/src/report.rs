//! Per-task, per-session and per-suite results, derived from the event log
//! alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use taskpos_core::agent::FailureReason;
use taskpos_core::events::{Event, EventRecord};
use taskpos_core::geometry::Pose2D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub session: String,
    pub task_id: String,
    /// Position in execution order.
    pub index: usize,
    pub instruction: String,
    pub zone: String,
    /// Ground-truth target: the matching object nearest the final pose.
    pub target: Option<String>,
    pub expected_target: Option<String>,
    pub faced_object: Option<String>,
    pub faced_matches: bool,
    pub final_distance_m: Option<f64>,
    pub bearing_deg: Option<f64>,
    pub facing_ok: bool,
    pub self_judged: bool,
    pub succeeded: bool,
    pub failure: Option<FailureReason>,
    pub failure_label: Option<String>,
    pub travel_m: f64,
    pub time_s: f64,
    pub final_pose: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvaluation {
    pub session: String,
    pub script: String,
    pub tags: Vec<String>,
    pub tasks: usize,
    pub expected_tasks: usize,
    pub tasks_succeeded: usize,
    pub order_ok: bool,
    pub succeeded: bool,
    pub executed_targets: Vec<String>,
    pub travel_m: f64,
    pub time_s: f64,
    pub commands_rejected: usize,
}

/// Reference means from the physical system, carried as labels only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeans {
    pub travel_per_session_m: f64,
    pub travel_per_task_m: f64,
    pub time_per_session_s: f64,
    pub time_per_task_s: f64,
}

impl Default for ReferenceMeans {
    fn default() -> Self {
        Self { travel_per_session_m: 30.6, travel_per_task_m: 13.7, time_per_session_s: 280.0, time_per_task_s: 124.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub travel_per_session_m: f64,
    pub time_per_session_s: f64,
    pub travel_per_task_m: f64,
    pub time_per_task_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub sessions: usize,
    pub sessions_succeeded: usize,
    pub session_sr: f64,
    /// Tasks the scripts expect to be executed.
    pub tasks: usize,
    pub tasks_succeeded: usize,
    pub task_sr: f64,
    pub tasks_failed: usize,
    /// Every failure reason, zero counts included.
    pub failure_histogram: BTreeMap<FailureReason, usize>,
    pub failures_by_module: BTreeMap<String, usize>,
    pub means: Means,
    pub means_succeeded_sessions: Means,
    pub means_failed_sessions: Option<Means>,
    pub reference: ReferenceMeans,
    pub session_reports: Vec<SessionEvaluation>,
    pub task_reports: Vec<TaskEvaluation>,
    /// SHA-256 of this report serialized with an empty digest.
    pub digest: String,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn means(sessions: &[&SessionEvaluation], tasks: &[&TaskEvaluation]) -> Means {
    Means {
        travel_per_session_m: mean(sessions.iter().map(|s| s.travel_m)),
        time_per_session_s: mean(sessions.iter().map(|s| s.time_s)),
        travel_per_task_m: mean(tasks.iter().map(|t| t.travel_m)),
        time_per_task_s: mean(tasks.iter().map(|t| t.time_s)),
    }
}

impl SuiteReport {
    pub fn from_records(suite: &str, records: &[EventRecord]) -> Self {
        let mut sessions = Vec::new();
        let mut tasks = Vec::new();
        for r in records {
            match &r.event {
                Event::TaskEvaluated { evaluation, .. } => {
                    if let Ok(t) = serde_json::from_value::<TaskEvaluation>(evaluation.clone()) {
                        tasks.push(t);
                    }
                }
                Event::SessionEvaluated { summary, .. } => {
                    if let Ok(s) = serde_json::from_value::<SessionEvaluation>(summary.clone()) {
                        sessions.push(s);
                    }
                }
                _ => {}
            }
        }
        Self::from_evaluations(suite, sessions, tasks)
    }

    pub fn from_evaluations(suite: &str, sessions: Vec<SessionEvaluation>, tasks: Vec<TaskEvaluation>) -> Self {
        // a task the script expects but that never ran counts as failed
        let expected: usize = sessions.iter().map(|s| s.expected_tasks.max(s.tasks)).sum();
        let succeeded = tasks.iter().filter(|t| t.succeeded).count();
        let mut histogram: BTreeMap<FailureReason, usize> = FailureReason::ALL.iter().map(|r| (*r, 0)).collect();
        for t in tasks.iter().filter(|t| !t.succeeded) {
            *histogram.entry(t.failure.unwrap_or(FailureReason::Internal)).or_default() += 1;
        }
        let missing: usize = sessions.iter().map(|s| s.expected_tasks.saturating_sub(s.tasks)).sum();
        *histogram.entry(FailureReason::TargetNotFound).or_default() += missing;
        let failed = expected - succeeded;
        let mut by_module = BTreeMap::new();
        for (r, n) in &histogram {
            *by_module.entry(r.module().to_string()).or_default() += n;
        }
        let sessions_succeeded = sessions.iter().filter(|s| s.succeeded).count();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };

        let all_s: Vec<&SessionEvaluation> = sessions.iter().collect();
        let all_t: Vec<&TaskEvaluation> = tasks.iter().collect();
        let ok_s: Vec<&SessionEvaluation> = sessions.iter().filter(|s| s.succeeded).collect();
        let ok_t: Vec<&TaskEvaluation> =
            tasks.iter().filter(|t| ok_s.iter().any(|s| s.session == t.session)).collect();
        let bad_s: Vec<&SessionEvaluation> = sessions.iter().filter(|s| !s.succeeded).collect();
        let bad_t: Vec<&TaskEvaluation> =
            tasks.iter().filter(|t| bad_s.iter().any(|s| s.session == t.session)).collect();

        let mut report = SuiteReport {
            suite: suite.to_string(),
            sessions: sessions.len(),
            sessions_succeeded,
            session_sr: ratio(sessions_succeeded, sessions.len()),
            tasks: expected,
            tasks_succeeded: succeeded,
            task_sr: ratio(succeeded, expected),
            tasks_failed: failed,
            failure_histogram: histogram,
            failures_by_module: by_module,
            means: means(&all_s, &all_t),
            means_succeeded_sessions: means(&ok_s, &ok_t),
            means_failed_sessions: (!bad_s.is_empty()).then(|| means(&bad_s, &bad_t)),
            reference: ReferenceMeans::default(),
            session_reports: sessions,
            task_reports: tasks,
            digest: String::new(),
        };
        report.digest = report.compute_digest();
        report
    }

    pub fn compute_digest(&self) -> String {
        let mut copy = self.clone();
        copy.digest.clear();
        let bytes = serde_json::to_vec(&copy).expect("report serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Share of failures attributed to the positioning module.
    pub fn positioning_failure_share(&self) -> f64 {
        let pos = self.failures_by_module.get("positioning").copied().unwrap_or(0);
        if self.tasks_failed == 0 {
            0.0
        } else {
            pos as f64 / self.tasks_failed as f64
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "suite {}: task SR {:.1}% ({}/{}), session SR {:.1}% ({}/{}), mean travel {:.1} m/session {:.1} m/task, mean time {:.0} s/session {:.0} s/task",
            self.suite,
            self.task_sr * 100.0,
            self.tasks_succeeded,
            self.tasks,
            self.session_sr * 100.0,
            self.sessions_succeeded,
            self.sessions,
            self.means.travel_per_session_m,
            self.means.travel_per_task_m,
            self.means.time_per_session_s,
            self.means.time_per_task_s,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(session: &str, ok: bool, failure: Option<FailureReason>) -> TaskEvaluation {
        TaskEvaluation {
            session: session.into(),
            task_id: "T1".into(),
            index: 0,
            instruction: "inspect x".into(),
            zone: "Z".into(),
            target: Some("x".into()),
            expected_target: Some("x".into()),
            faced_object: Some("x".into()),
            faced_matches: ok,
            final_distance_m: Some(0.7),
            bearing_deg: Some(0.0),
            facing_ok: true,
            self_judged: true,
            succeeded: ok,
            failure,
            failure_label: failure.map(|f| f.label().into()),
            travel_m: 10.0,
            time_s: 100.0,
            final_pose: Pose2D::new(0.0, 0.0, 0.0),
        }
    }

    fn session(id: &str, tasks: usize, expected: usize, ok: usize) -> SessionEvaluation {
        SessionEvaluation {
            session: id.into(),
            script: id.into(),
            tags: vec![],
            tasks,
            expected_tasks: expected,
            tasks_succeeded: ok,
            order_ok: true,
            succeeded: ok == expected && tasks == expected,
            executed_targets: vec![],
            travel_m: 20.0,
            time_s: 200.0,
            commands_rejected: 0,
        }
    }

    #[test]
    fn histogram_sums_to_failed_tasks() {
        let r = SuiteReport::from_evaluations(
            "X",
            vec![session("S1", 2, 2, 1), session("S2", 1, 2, 1)],
            vec![
                task("S1", true, None),
                task("S1", false, Some(FailureReason::WrongObject)),
                task("S2", true, None),
            ],
        );
        assert_eq!(r.tasks, 4);
        assert_eq!(r.tasks_succeeded, 2);
        assert_eq!(r.failure_histogram.values().sum::<usize>(), r.tasks_failed);
        assert_eq!(r.failure_histogram[&FailureReason::TargetNotFound], 1);
        assert!((r.task_sr - 0.5).abs() < 1e-12);
        assert_eq!(r.sessions_succeeded, 0);
        assert_eq!(r.positioning_failure_share(), 1.0);
    }

    #[test]
    fn digest_ignores_its_own_field() {
        let r = SuiteReport::from_evaluations("X", vec![session("S1", 1, 1, 1)], vec![task("S1", true, None)]);
        assert_eq!(r.digest, r.compute_digest());
        let mut other = r.clone();
        other.session_reports[0].travel_m += 1.0;
        assert_ne!(other.compute_digest(), r.digest);
    }
}
