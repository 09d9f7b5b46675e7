//! Scripted test sessions: an initial command, timed mid-execution
//! commands, and the target order a correct run must follow.

use serde::{Deserialize, Serialize};

use crate::agent::Phase;

/// When a mid-execution command is delivered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    /// Right after the named task reaches a terminal state.
    AfterTask(String),
    /// At an absolute session-relative simulated time (seconds).
    AtSimTime(f64),
    /// While the named task is running, `delay_s` after it started (or
    /// after it entered `phase`, when given).
    DuringTask {
        task: String,
        #[serde(default = "default_during_delay")]
        delay_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Phase>,
    },
}

fn default_during_delay() -> f64 {
    2.0
}

impl Trigger {
    pub fn task_ref(&self) -> Option<&str> {
        match self {
            Trigger::AfterTask(t) => Some(t),
            Trigger::DuringTask { task, .. } => Some(task),
            Trigger::AtSimTime(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MidCommand {
    pub trigger: Trigger,
    pub text: String,
}

/// One expected executed task: its position in execution order and the
/// ground-truth target object id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedTask {
    pub task_index: usize,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionScript {
    pub id: String,
    pub command: String,
    #[serde(default)]
    pub mid_commands: Vec<MidCommand>,
    pub expected_order: Vec<ExpectedTask>,
    /// Free-form labels such as `semantic`, `add`, `cancel`, `combined`.
    #[serde(default)]
    pub tags: Vec<String>,
    /// Objects present during the session; all scenario objects when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<String>>,
}

/// Parses a task reference of the form `T<n>`.
pub fn parse_task_ref(s: &str) -> Option<u32> {
    s.strip_prefix('T').and_then(|n| n.parse().ok()).filter(|&n| n >= 1)
}

/// Number of sentences in a command. A `.`, `!` or `?` ends a sentence only
/// when followed by whitespace or the end of the text.
pub fn sentence_count(text: &str) -> usize {
    crate::reasoning::grammar::split_sentences(text).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigger_json_forms() {
        let t: Trigger = serde_json::from_str(r#"{"after_task":"T1"}"#).unwrap();
        assert_eq!(t, Trigger::AfterTask("T1".into()));
        let t: Trigger = serde_json::from_str(r#"{"during_task":{"task":"T2"}}"#).unwrap();
        assert_eq!(t, Trigger::DuringTask { task: "T2".into(), delay_s: 2.0, phase: None });
        let t: Trigger = serde_json::from_str(r#"{"during_task":{"task":"T1","delay_s":0,"phase":"positioning"}}"#).unwrap();
        assert_eq!(t, Trigger::DuringTask { task: "T1".into(), delay_s: 0.0, phase: Some(Phase::Positioning) });
        let t: Trigger = serde_json::from_str(r#"{"at_sim_time":12.5}"#).unwrap();
        assert_eq!(t, Trigger::AtSimTime(12.5));
        assert!(serde_json::from_str::<Trigger>(r#"{"sometime":1}"#).is_err());
    }

    #[test]
    fn task_refs() {
        assert_eq!(parse_task_ref("T3"), Some(3));
        assert_eq!(parse_task_ref("T0"), None);
        assert_eq!(parse_task_ref("3"), None);
    }

    #[test]
    fn counts_sentences() {
        assert_eq!(
            sentence_count("Move to 12C5 and inspect the open toolbox. Then move to 12C3 to inspect the tripod."),
            2
        );
    }
}
