//! Batch runner: plays scripted sessions against a fresh simulator each,
//! delivers mid-execution commands on their triggers and writes ground-truth
//! evaluations into the event log.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taskpos_core::agent::{AgentCore, FailureReason, Phase, Task, TaskStatus};
use taskpos_core::events::{Event, EventLog, EventRecord, SimClock};
use taskpos_core::geometry::{bearing_right, Point2, Pose2D};
use taskpos_core::navigation::{prepare_registry, NavError, ZoneRegistry};
use taskpos_core::positioning::PositioningConfig;
use taskpos_core::reasoning::Gateway;
use taskpos_core::session::{SessionScript, Trigger};
use taskpos_core::sim::{line_of_sight, region_for_bearing, Region, SimConfig, Simulator, StatusBoard};
use taskpos_core::world::{object_matches, RelationGraph, Scenario, WorldObject};

use crate::report::{SessionEvaluation, SuiteReport, TaskEvaluation};

/// A destination farther than this from the true target means the wrong
/// zone label was chosen.
pub const WRONG_ZONE_M: f64 = 6.0;
pub const SUCCESS_DISTANCE_M: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("zone registry preparation failed: {0}")]
    Registry(#[from] NavError),
    #[error("script/scenario mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub sim: SimConfig,
    pub positioning: PositioningConfig,
    /// Simulated seconds per session before remaining tasks fail.
    pub budget_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, sim: SimConfig::default(), positioning: PositioningConfig::default(), budget_s: 600.0 }
    }
}

/// One session to play: the script, the id it runs under and the seed for
/// object placement jitter.
#[derive(Debug, Clone)]
pub struct SessionPlan {
    pub script: SessionScript,
    pub run_id: String,
    pub jitter_seed: u64,
}

/// Shared pieces of a batch run.
pub struct Harness<'a> {
    pub scenario: &'a Scenario,
    pub gateway: Arc<Gateway>,
    pub registry: ZoneRegistry,
    pub events: EventLog,
    pub config: RunConfig,
    pub board: Option<StatusBoard>,
}

impl<'a> Harness<'a> {
    /// Builds the zone registry once for the whole batch.
    pub fn new(scenario: &'a Scenario, gateway: Arc<Gateway>, events: EventLog, config: RunConfig) -> Result<Self, HarnessError> {
        gateway.begin_session("registry");
        let registry = prepare_registry(scenario, &gateway)?;
        Ok(Self { scenario, gateway, registry, events, config, board: None })
    }

    /// Every scripted session once, in file order.
    pub fn suite_plan(&self) -> Vec<SessionPlan> {
        self.scenario
            .sessions
            .iter()
            .enumerate()
            .map(|(i, s)| SessionPlan { script: s.clone(), run_id: s.id.clone(), jitter_seed: mix(self.config.seed, i as u64) })
            .collect()
    }

    /// `n` sessions cycling through the scripts, each with its own placement.
    pub fn repeated_plan(&self, n: usize) -> Vec<SessionPlan> {
        let k = self.scenario.sessions.len().max(1);
        (0..n)
            .filter_map(|i| {
                let s = self.scenario.sessions.get(i % k)?;
                Some(SessionPlan {
                    script: s.clone(),
                    run_id: format!("{}-{:02}", s.id, i),
                    jitter_seed: mix(self.config.seed, i as u64),
                })
            })
            .collect()
    }

    /// Plays every plan and derives the report from the log.
    pub fn run(&self, plans: &[SessionPlan]) -> SuiteReport {
        let first = self.events.len() as u64;
        for p in plans {
            self.run_session(p);
        }
        self.events.set_session(None);
        let records = self.events.records_since(first);
        let suite = self.scenario.suite.clone().unwrap_or_else(|| "custom".into());
        SuiteReport::from_records(&suite, &records)
    }

    pub fn run_session(&self, plan: &SessionPlan) -> SessionEvaluation {
        let script = &plan.script;
        let objects = jittered_objects(self.scenario, script, plan.jitter_seed);
        let mut sim = Simulator::from_parts(self.scenario.grid.clone(), objects.clone(), self.scenario.robot_start, self.config.sim.clone());
        if let Some(b) = &self.board {
            sim.attach_board(b.clone());
        }
        sim.attach_events(self.events.clone());
        self.events.set_session(Some(plan.run_id.clone()));
        self.gateway.begin_session(&plan.run_id);
        let start_seq = self.events.len() as u64;
        self.events.emit(Event::SessionStarted {
            session: plan.run_id.clone(),
            suite: self.scenario.suite.clone(),
            odometer: sim.odometer(),
        });

        let core = Arc::new(AgentCore::new(
            self.gateway.clone(),
            self.registry.clone(),
            self.events.clone(),
            self.config.positioning.clone(),
        ));
        core.set_deadline(Some(self.config.budget_s));
        let triggers = Triggers::new(script);
        {
            let core = core.clone();
            let triggers = triggers.clone();
            sim.add_tick_hook(Box::new(move |st| triggers.fire_timed(&core, st.sim_time)));
        }

        let _ = core.handle_command(&script.command);
        triggers.fire_between(&core, self.events.clock());
        loop {
            if core.run_next(&mut sim).is_some() {
                triggers.fire_between(&core, self.events.clock());
                continue;
            }
            if !triggers.awaiting_time() || sim.sim_time() >= self.config.budget_s {
                break;
            }
            sim.idle_tick();
            triggers.fire_between(&core, self.events.clock());
        }

        let records = self.events.records_since(start_seq);
        let graph = SessionWorld { objects: sim.objects().to_vec(), scenario: self.scenario };
        let ctx = EvalContext { sim: &sim, graph: &graph, records: &records };
        let executed: Vec<Task> = core
            .snapshot()
            .history()
            .iter()
            .filter(|t| matches!(t.status, TaskStatus::Succeeded | TaskStatus::Failed))
            .cloned()
            .collect();
        let mut evals = Vec::new();
        for (i, t) in executed.iter().enumerate() {
            let expected = script.expected_order.get(i).map(|e| e.target.clone());
            let e = ctx.evaluate(&plan.run_id, i, t, expected);
            self.events.emit(Event::TaskEvaluated {
                task_id: t.id.clone(),
                evaluation: serde_json::to_value(&e).expect("evaluation serializes"),
            });
            evals.push(e);
        }
        let order_ok = evals.len() == script.expected_order.len()
            && evals.iter().zip(&script.expected_order).all(|(e, x)| e.target.as_deref() == Some(x.target.as_str()));
        let tasks_succeeded = evals.iter().filter(|e| e.succeeded).count();
        let summary = SessionEvaluation {
            session: plan.run_id.clone(),
            script: script.id.clone(),
            tags: script.tags.clone(),
            tasks: evals.len(),
            expected_tasks: script.expected_order.len(),
            tasks_succeeded,
            order_ok,
            succeeded: order_ok && tasks_succeeded == evals.len(),
            executed_targets: evals.iter().map(|e| e.target.clone().unwrap_or_default()).collect(),
            travel_m: sim.odometer(),
            time_s: sim.sim_time(),
            commands_rejected: records.iter().filter(|r| matches!(r.event, Event::CommandRejected { .. })).count(),
        };
        self.events.emit(Event::SessionEvaluated {
            session: plan.run_id.clone(),
            summary: serde_json::to_value(&summary).expect("summary serializes"),
        });
        summary
    }
}

fn mix(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i.wrapping_mul(0x2545_F491_4F6C_DD1D)).wrapping_add(i)
}

/// Session objects with non-anchored ones nudged by up to the scenario's
/// placement jitter. A draw that lands near a wall, another object or
/// across a wall is retried, then the authored pose is kept.
pub fn jittered_objects(scenario: &Scenario, script: &SessionScript, seed: u64) -> Vec<WorldObject> {
    let mut objects = scenario.session_objects(script);
    let r = scenario.placement_jitter_m;
    if r <= 0.0 {
        return objects;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = &scenario.grid;
    for i in 0..objects.len() {
        if scenario.anchored.contains(&objects[i].id) {
            continue;
        }
        let origin = objects[i].pose;
        let margin = objects[i].footprint_radius + 0.3;
        for _ in 0..20 {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = r * rng.gen::<f64>().sqrt();
            let p = origin + Point2::new(a.cos(), a.sin()) * d;
            let clear_of_walls = (0..8)
                .map(|k| f64::from(k) * std::f64::consts::FRAC_PI_4)
                .all(|t| grid.is_free_at(p + Point2::new(t.cos(), t.sin()) * margin))
                && grid.is_free_at(p)
                && line_of_sight(grid, origin, p);
            let clear_of_objects = objects
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .all(|(_, o)| o.pose.distance(p) >= o.footprint_radius + objects[i].footprint_radius + 0.3 || o.pose.distance(origin) < 1e-9);
            if clear_of_walls && clear_of_objects {
                objects[i].pose = p;
                break;
            }
        }
    }
    objects
}

struct PendingCommand {
    trigger: Trigger,
    text: String,
    fired: bool,
    since: Option<f64>,
}

/// Mid-execution commands still to deliver. Timed ones fire from the tick
/// hook; `after_task` ones between task runs.
#[derive(Clone)]
struct Triggers(Arc<Mutex<Vec<PendingCommand>>>);

impl Triggers {
    fn new(script: &SessionScript) -> Self {
        Self(Arc::new(Mutex::new(
            script
                .mid_commands
                .iter()
                .map(|m| PendingCommand { trigger: m.trigger.clone(), text: m.text.clone(), fired: false, since: None })
                .collect(),
        )))
    }

    fn deliver(core: &AgentCore, texts: Vec<String>) {
        for t in texts {
            // rejections are logged by the core
            let _ = core.handle_command(&t);
        }
    }

    fn fire_timed(&self, core: &AgentCore, now: f64) {
        let running = core.snapshot().running().map(|t| (t.id.clone(), t.status));
        let due: Vec<String> = {
            let mut v = self.0.lock().expect("trigger state poisoned");
            v.iter_mut()
                .filter(|p| !p.fired)
                .filter_map(|p| {
                    let hit = match &p.trigger {
                        Trigger::AtSimTime(t) => now >= *t - 1e-9,
                        Trigger::DuringTask { task, delay_s, phase } => {
                            let in_phase = running.as_ref().is_some_and(|(id, st)| {
                                id == task
                                    && match phase {
                                        None => true,
                                        Some(Phase::Navigation) => *st == TaskStatus::Navigating,
                                        Some(Phase::Positioning) => *st == TaskStatus::Positioning,
                                    }
                            });
                            if in_phase {
                                let since = *p.since.get_or_insert(now);
                                now - since >= *delay_s - 1e-9
                            } else {
                                false
                            }
                        }
                        Trigger::AfterTask(_) => false,
                    };
                    hit.then(|| {
                        p.fired = true;
                        p.text.clone()
                    })
                })
                .collect()
        };
        Self::deliver(core, due);
    }

    fn fire_between(&self, core: &AgentCore, clock: &SimClock) {
        loop {
            let done: Vec<String> = core.snapshot().history().iter().map(|t| t.id.clone()).collect();
            let now = clock.now();
            let due: Vec<String> = {
                let mut v = self.0.lock().expect("trigger state poisoned");
                v.iter_mut()
                    .filter(|p| !p.fired)
                    .filter(|p| match &p.trigger {
                        Trigger::AfterTask(id) => done.contains(id),
                        Trigger::AtSimTime(t) => now >= *t - 1e-9,
                        Trigger::DuringTask { .. } => false,
                    })
                    .map(|p| {
                        p.fired = true;
                        p.text.clone()
                    })
                    .collect()
            };
            if due.is_empty() {
                return;
            }
            Self::deliver(core, due);
        }
    }

    /// True while an absolute-time command is still to come.
    fn awaiting_time(&self) -> bool {
        self.0
            .lock()
            .expect("trigger state poisoned")
            .iter()
            .any(|p| !p.fired && matches!(p.trigger, Trigger::AtSimTime(_)))
    }
}

struct SessionWorld<'a> {
    objects: Vec<WorldObject>,
    scenario: &'a Scenario,
}

impl RelationGraph for SessionWorld<'_> {
    fn object(&self, id: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }
    fn objects(&self) -> &[WorldObject] {
        &self.objects
    }
    fn has_zone(&self, name: &str) -> bool {
        self.scenario.label(name).is_some()
    }
}

struct EvalContext<'a> {
    sim: &'a Simulator,
    graph: &'a SessionWorld<'a>,
    records: &'a [EventRecord],
}

#[derive(Default)]
struct TaskTrace {
    start: Option<(f64, f64)>,
    end: Option<(f64, f64)>,
    final_pose: Option<Pose2D>,
    destination: Option<Point2>,
}

impl EvalContext<'_> {
    /// Ids of `task` and every task it was reissued from.
    fn lineage(&self, task: &Task) -> Vec<String> {
        let by_id: HashMap<&str, &Task> = self
            .records
            .iter()
            .filter_map(|r| match &r.event {
                Event::TaskCreated { task, .. } => Some((task.id.as_str(), task)),
                _ => None,
            })
            .collect();
        let mut out = vec![task.id.clone()];
        let mut cur = task.reissued_from.clone();
        while let Some(id) = cur {
            cur = by_id.get(id.as_str()).and_then(|t| t.reissued_from.clone());
            out.push(id);
        }
        out
    }

    fn trace(&self, task: &Task) -> TaskTrace {
        let ids = self.lineage(task);
        let mut t = TaskTrace::default();
        for r in self.records {
            match &r.event {
                Event::TaskStarted { task_id, odometer, .. } if ids.contains(task_id) && t.start.is_none() => {
                    t.start = Some((r.sim_time, *odometer));
                }
                Event::DestinationResolved { task_id, position, .. } if ids.contains(task_id) => {
                    t.destination = Some(*position);
                }
                Event::TaskTerminal { task_id, final_pose, odometer, .. } if *task_id == task.id => {
                    t.end = odometer.map(|o| (r.sim_time, o));
                    t.final_pose = *final_pose;
                }
                _ => {}
            }
        }
        t
    }

    fn evaluate(&self, session: &str, index: usize, task: &Task, expected: Option<String>) -> TaskEvaluation {
        let trace = self.trace(task);
        let pose = trace.final_pose.unwrap_or_else(|| self.sim.pose());
        let (travel_m, time_s) = match (trace.start, trace.end) {
            (Some((t0, o0)), Some((t1, o1))) => (o1 - o0, t1 - t0),
            _ => (0.0, 0.0),
        };
        let self_judged = task.status == TaskStatus::Succeeded;
        let mut e = TaskEvaluation {
            session: session.to_string(),
            task_id: task.id.clone(),
            index,
            instruction: task.instruction.clone(),
            zone: task.zone_expr.clone(),
            target: None,
            expected_target: expected,
            faced_object: None,
            faced_matches: false,
            final_distance_m: None,
            bearing_deg: None,
            facing_ok: false,
            self_judged,
            succeeded: false,
            failure: None,
            failure_label: None,
            travel_m,
            time_s,
            final_pose: pose,
        };

        let matches = |o: &WorldObject| {
            task.target.as_ref().is_some_and(|p| object_matches(o, p, self.graph).unwrap_or(false))
        };
        let target = self
            .graph
            .objects
            .iter()
            .filter(|o| matches(o))
            .min_by(|a, b| a.pose.distance(pose.position()).total_cmp(&b.pose.distance(pose.position())));
        let faced = self
            .sim
            .render_observation_at(pose)
            .frame_objects
            .into_iter()
            .filter(|f| f.region == Region::Center && !f.occluded)
            .find(|f| self.graph.object(&f.id).is_some_and(|o| o.relations.carried_by.is_none()));
        e.faced_object = faced.as_ref().map(|f| f.id.clone());
        e.faced_matches = faced.as_ref().and_then(|f| self.graph.object(&f.id)).is_some_and(matches);

        let Some(target) = target else {
            // nothing in the world satisfies the predicate
            e.failure = Some(FailureReason::WrongObject);
            e.failure_label = Some(FailureReason::WrongObject.label().into());
            return e;
        };
        let dist = target.pose.distance(pose.position());
        let bearing = bearing_right(pose.position(), pose.heading, target.pose);
        e.target = Some(target.id.clone());
        e.final_distance_m = Some(dist);
        e.bearing_deg = Some(bearing);
        e.facing_ok = region_for_bearing(bearing, self.sim.config().fov_deg) == Some(Region::Center);

        let ground_ok = dist <= SUCCESS_DISTANCE_M && e.facing_ok && e.faced_matches;
        let wrong_zone = trace.destination.is_some_and(|d| d.distance(target.pose) > WRONG_ZONE_M);
        let failure = if self_judged && ground_ok {
            None
        } else if wrong_zone {
            Some(FailureReason::WrongZoneLabel)
        } else if self_judged {
            Some(if faced.is_some() && !e.faced_matches {
                FailureReason::WrongObject
            } else if dist > SUCCESS_DISTANCE_M {
                FailureReason::DistanceOver1m
            } else {
                FailureReason::WrongObject
            })
        } else if ground_ok {
            Some(FailureReason::SelfJudgment)
        } else {
            Some(task.failure.unwrap_or(FailureReason::TargetNotFound))
        };
        e.succeeded = failure.is_none();
        e.failure = failure;
        e.failure_label = failure.map(|f| f.label().to_string());
        e
    }
}
