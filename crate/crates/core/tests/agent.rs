use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use taskpos_core::agent::{AgentCore, TaskStatus};
use taskpos_core::events::{Event, EventLog, SimClock};
use taskpos_core::navigation::prepare_registry;
use taskpos_core::positioning::PositioningConfig;
use taskpos_core::reasoning::{Gateway, OracleBackend};
use taskpos_core::sim::{SimConfig, Simulator};
use taskpos_core::world::{load_scenario, Scenario};

fn suite_c() -> Scenario {
    load_scenario(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/suite_c.json")).unwrap()
}

fn setup(sc: &Scenario, session: &str) -> (Arc<AgentCore>, Simulator, EventLog) {
    let gateway = Arc::new(Gateway::new(Box::new(OracleBackend::new(sc))));
    gateway.begin_session("registry");
    let registry = prepare_registry(sc, &gateway).unwrap();
    let events = EventLog::new(SimClock::default());
    let script = sc.session(session).unwrap();
    let mut sim = Simulator::from_parts(sc.grid.clone(), sc.session_objects(script), sc.robot_start, SimConfig::default());
    sim.attach_events(events.clone());
    gateway.begin_session(session);
    let core = Arc::new(AgentCore::new(gateway, registry, events.clone(), PositioningConfig::default()));
    core.handle_command(&script.command).unwrap();
    (core, sim, events)
}

fn history(core: &AgentCore) -> Vec<(String, TaskStatus)> {
    core.snapshot().history().iter().map(|t| (t.zone_expr.clone(), t.status)).collect()
}

#[test]
fn cancel_pending_task_between_runs() {
    let sc = suite_c();
    let (core, mut sim, _) = setup(&sc, "C04");
    assert_eq!(core.snapshot().active().len(), 3);
    core.run_next(&mut sim).unwrap();
    core.handle_command("Cancel the last task.").unwrap();
    core.run_all(&mut sim);
    let h = history(&core);
    assert_eq!(
        h,
        vec![
            ("12C2".into(), TaskStatus::Succeeded),
            ("12C5".into(), TaskStatus::Cancelled),
            ("1220".into(), TaskStatus::Succeeded),
        ]
    );
}

#[test]
fn reorder_between_runs() {
    let sc = suite_c();
    let (core, mut sim, _) = setup(&sc, "C09");
    core.run_next(&mut sim).unwrap();
    core.handle_command("Do the last task first.").unwrap();
    core.run_all(&mut sim);
    let zones: Vec<String> = history(&core).into_iter().map(|(z, _)| z).collect();
    assert_eq!(zones, ["12C4", "12C5", "12C1"]);
}

#[test]
fn add_after_list_drains() {
    let sc = suite_c();
    let (core, mut sim, _) = setup(&sc, "C01");
    core.run_all(&mut sim);
    core.handle_command("Add: Move to 12C3 and inspect the fire extinguisher without a yellow tag.").unwrap();
    core.run_all(&mut sim);
    let h = history(&core);
    assert_eq!(h.len(), 2);
    assert!(h.iter().all(|(_, s)| *s == TaskStatus::Succeeded));
}

#[test]
fn cancel_running_task_stops_within_one_behavior() {
    let sc = suite_c();
    let (core, mut sim, events) = setup(&sc, "C05");
    core.run_next(&mut sim).unwrap();
    let fired = Arc::new(AtomicBool::new(false));
    {
        let core = core.clone();
        let fired = fired.clone();
        let start = sim.sim_time();
        sim.add_tick_hook(Box::new(move |st| {
            if st.sim_time >= start + 2.0 && !fired.swap(true, Ordering::SeqCst) {
                core.handle_command("Cancel the current task.").unwrap();
            }
        }));
    }
    core.run_all(&mut sim);
    assert!(fired.load(Ordering::SeqCst));
    let h = history(&core);
    assert_eq!(h[1], ("12C6".into(), TaskStatus::Cancelled));
    assert_eq!(h[2], ("1221".into(), TaskStatus::Succeeded));

    let records = events.records();
    let stop = records.iter().position(|r| matches!(r.event, Event::StopSignal { .. })).unwrap();
    let after: Vec<_> = records[stop..]
        .iter()
        .take_while(|r| !matches!(&r.event, Event::TaskTerminal { status: TaskStatus::Cancelled, .. }))
        .filter(|r| matches!(r.event, Event::BehaviorIssued { .. }))
        .collect();
    assert!(after.len() <= 1);
}

#[test]
fn blank_command_is_rejected_without_side_effects() {
    let sc = suite_c();
    let gateway = Arc::new(Gateway::new(Box::new(OracleBackend::new(&sc))));
    let registry = prepare_registry(&sc, &gateway).unwrap();
    let core = AgentCore::new(gateway, registry, EventLog::new(SimClock::default()), PositioningConfig::default());
    assert!(core.handle_command("   ").is_err());
    assert!(core.snapshot().is_empty());
    assert_eq!(core.snapshot().revision(), 0);
}
