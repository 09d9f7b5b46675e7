use std::path::PathBuf;
use std::sync::Arc;

use taskpos_core::events::{read_log, EventLog, SimClock};
use taskpos_core::reasoning::{Gateway, OracleBackend};
use taskpos_core::world::{load_scenario, Scenario};
use taskpos_service::harness::jittered_objects;
use taskpos_service::{run_repeated, run_suite, BackendSpec, Harness, RunConfig, SuiteReport};

fn scenario(name: &str) -> Scenario {
    load_scenario(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)).unwrap()
}

#[test]
fn repeated_plan_cycles_scripts() {
    let sc = scenario("suite_b.json");
    let gw = Arc::new(Gateway::new(Box::new(OracleBackend::new(&sc))));
    let h = Harness::new(&sc, gw, EventLog::new(SimClock::default()), RunConfig::default()).unwrap();
    let plans = h.repeated_plan(17);
    assert_eq!(plans.len(), 17);
    assert_eq!(plans[0].run_id, format!("{}-00", sc.sessions[0].id));
    assert_eq!(plans[16].run_id, format!("{}-16", sc.sessions[1].id));
    let seeds: std::collections::HashSet<u64> = plans.iter().map(|p| p.jitter_seed).collect();
    assert_eq!(seeds.len(), 17);
}

#[test]
fn jitter_is_seeded() {
    let sc = scenario("suite_b.json");
    let s = &sc.sessions[0];
    let a = jittered_objects(&sc, s, 11);
    assert_eq!(a, jittered_objects(&sc, s, 11));
    assert_ne!(a, jittered_objects(&sc, s, 12));
    assert_eq!(a.len(), sc.session_objects(s).len());
}

#[test]
fn report_rebuilds_from_log_file() {
    let sc = scenario("suite_a.json");
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("a.ndjson");
    let run = run_suite(&sc, &BackendSpec::Oracle, RunConfig::default(), Some(&log)).unwrap();
    let records = read_log(&log).unwrap();
    let rebuilt = SuiteReport::from_records(&run.report.suite, &records);
    assert_eq!(rebuilt.digest, run.report.digest);
    assert_eq!(rebuilt.tasks_succeeded, run.report.tasks_succeeded);
}

#[test]
fn heavy_noise_fails_in_positioning() {
    let sc = scenario("suite_b.json");
    let run = run_repeated(&sc, &BackendSpec::Noise(1.0), RunConfig { seed: 3, ..RunConfig::default() }, 6).unwrap();
    let r = run.report;
    assert!(r.tasks_failed > 0);
    assert_eq!(r.failure_histogram.values().sum::<usize>(), r.tasks_failed);
    assert!(r.positioning_failure_share() >= 0.7, "{:?}", r.failures_by_module);
}

#[test]
fn same_seed_same_digest() {
    let sc = scenario("suite_c.json");
    let a = run_suite(&sc, &BackendSpec::Oracle, RunConfig::default(), None).unwrap();
    let b = run_suite(&sc, &BackendSpec::Oracle, RunConfig::default(), None).unwrap();
    assert_eq!(a.events.digest(), b.events.digest());
}
