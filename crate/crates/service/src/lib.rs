//! Operator-facing service: suite harness, ground-truth evaluation,
//! reports, HTTP API and CLI plumbing.

pub mod api;
pub mod backend;
pub mod harness;
pub mod report;

use std::path::Path;
use std::sync::Arc;

use taskpos_core::events::{EventLog, SimClock};
use taskpos_core::reasoning::Gateway;
use taskpos_core::world::Scenario;

pub use backend::BackendSpec;
pub use harness::{Harness, HarnessError, RunConfig, SessionPlan};
pub use report::{SessionEvaluation, SuiteReport, TaskEvaluation};

/// Everything a finished batch leaves behind.
pub struct SuiteRun {
    pub report: SuiteReport,
    pub events: EventLog,
    pub gateway: Arc<Gateway>,
}

/// Runs every session of `scenario` once. `log` also streams records to a
/// file.
pub fn run_suite(
    scenario: &Scenario,
    backend: &BackendSpec,
    config: RunConfig,
    log: Option<&Path>,
) -> anyhow::Result<SuiteRun> {
    run_plans(scenario, backend, config, log, |h| h.suite_plan())
}

/// Runs `n` sessions cycling through the scripts with fresh placements.
pub fn run_repeated(scenario: &Scenario, backend: &BackendSpec, config: RunConfig, n: usize) -> anyhow::Result<SuiteRun> {
    run_plans(scenario, backend, config, None, |h| h.repeated_plan(n))
}

fn run_plans(
    scenario: &Scenario,
    backend: &BackendSpec,
    config: RunConfig,
    log: Option<&Path>,
    plans: impl FnOnce(&Harness) -> Vec<SessionPlan>,
) -> anyhow::Result<SuiteRun> {
    let gateway = Arc::new(Gateway::new(backend.build(scenario, config.seed)?));
    let mut events = EventLog::new(SimClock::default());
    if let Some(p) = log {
        events = events.with_file(p)?;
    }
    events.retain_status_in_memory(false);
    let harness = Harness::new(scenario, gateway.clone(), events.clone(), config)?;
    let plans = plans(&harness);
    let report = harness.run(&plans);
    events.flush()?;
    Ok(SuiteRun { report, events, gateway })
}
