//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always show; exits non-zero if any criterion fails.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taskpos_core::agent::FailureReason;
use taskpos_core::events::{Event, EventRecord};
use taskpos_core::geometry::{bearing_right, Point2, Pose2D};
use taskpos_core::navigation::resolve_destination;
use taskpos_core::positioning::{position_to_target, PositioningConfig, PositioningGoal};
use taskpos_core::reasoning::{Gateway, OracleBackend};
use taskpos_core::sim::{astar, region_for_bearing, Region, SimConfig, Simulator};
use taskpos_core::world::{load_scenario, parse_scenario, DrawingTransform, OccupancyGrid, Scenario, TargetPredicate, WorldObject};
use taskpos_service::{run_repeated, run_suite, BackendSpec, RunConfig, SuiteReport};

const WALL_LIMIT: Duration = Duration::from_secs(120);

fn scenario(name: &str) -> Scenario {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed_suite(name: &str) -> (SuiteReport, Vec<EventRecord>, Duration) {
    let sc = scenario(name);
    let t0 = Instant::now();
    let run = run_suite(&sc, &BackendSpec::Oracle, RunConfig::default(), None).expect("suite runs");
    (run.report, run.events.records(), t0.elapsed())
}

fn suite_a() -> Outcome {
    let (r, _, wall) = timed_suite("suite_a.json");
    let pass = r.task_sr == 1.0 && r.session_sr == 1.0 && r.tasks == 35 && r.sessions == 15 && wall < WALL_LIMIT;
    outcome(
        pass,
        format!(
            "task SR {}/{} session SR {}/{} wall {:.2}s",
            r.tasks_succeeded, r.tasks, r.sessions_succeeded, r.sessions, wall.as_secs_f64()
        ),
    )
}

fn suite_b() -> Outcome {
    let (r, _, wall) = timed_suite("suite_b.json");
    let faced_ok = r.task_reports.iter().filter(|t| t.faced_matches).count();
    let distractor = r.failure_histogram[&FailureReason::WrongObject];
    let pass = r.tasks == 35 && faced_ok == 35 && distractor == 0 && wall < WALL_LIMIT;
    outcome(
        pass,
        format!(
            "faced object satisfies predicate {faced_ok}/{} distractor selections {distractor} task SR {}/{} wall {:.2}s",
            r.tasks, r.tasks_succeeded, r.tasks, wall.as_secs_f64()
        ),
    )
}

/// Behavior commands issued between each stop signal and its task's
/// terminal record.
fn stop_latencies(records: &[EventRecord]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let Event::StopSignal { task_id, .. } = &r.event else { continue };
        let mut n = 0;
        for later in &records[i + 1..] {
            if later.session != r.session {
                break;
            }
            match &later.event {
                Event::BehaviorIssued { .. } => n += 1,
                Event::TaskTerminal { task_id: t, .. } if t == task_id => break,
                _ => {}
            }
        }
        out.push(n);
    }
    out
}

fn suite_c() -> Outcome {
    let (r, records, wall) = timed_suite("suite_c.json");
    let ordered = r.session_reports.iter().filter(|s| s.order_ok).count();
    let lat = stop_latencies(&records);
    let worst = lat.iter().copied().max().unwrap_or(0);
    let pass = r.tasks == 33 && ordered == 15 && !lat.is_empty() && worst <= 1 && wall < WALL_LIMIT;
    outcome(
        pass,
        format!(
            "order correct {ordered}/15 preemptions {} worst stop latency {worst} behavior(s) task SR {}/{} wall {:.2}s",
            lat.len(), r.tasks_succeeded, r.tasks, wall.as_secs_f64()
        ),
    )
}

fn noise() -> Outcome {
    let sc = scenario("suite_b.json");
    let mut lines = Vec::new();
    let mut srs = Vec::new();
    let mut pos_fail = 0usize;
    let mut all_fail = 0usize;
    for p in [0.0, 0.1, 0.3] {
        let run = run_repeated(&sc, &BackendSpec::Noise(p), RunConfig { seed: 7, ..RunConfig::default() }, 50)
            .expect("noise run");
        let r = run.report;
        srs.push(r.task_sr);
        pos_fail += r.failures_by_module.get("positioning").copied().unwrap_or(0);
        all_fail += r.tasks_failed;
        lines.push(format!("p={p}: task SR {:.3} failures {} positioning share {:.2}", r.task_sr, r.tasks_failed, r.positioning_failure_share()));
    }
    let monotone = srs.windows(2).all(|w| w[1] <= w[0]);
    let share = if all_fail == 0 { 1.0 } else { pos_fail as f64 / all_fail as f64 };
    outcome(monotone && share >= 0.7, format!("{}; pooled positioning share {share:.2}", lines.join("; ")))
}

/// Independent Dijkstra over the same move rules: 8-connected, no corner
/// cutting, unit and sqrt(2) step costs. Returns (straight, diagonal).
fn dijkstra(free: &[bool], w: usize, h: usize, s: (usize, usize), g: (usize, usize)) -> Option<(u32, u32)> {
    let idx = |x: usize, y: usize| y * w + x;
    let ok = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && free[idx(x as usize, y as usize)];
    let mut dist: Vec<Option<(u32, u32)>> = vec![None; w * h];
    let cost = |c: (u32, u32)| c.0 as f64 + c.1 as f64 * std::f64::consts::SQRT_2;
    let mut heap = BinaryHeap::new();
    dist[idx(s.0, s.1)] = Some((0, 0));
    heap.push(Reverse((ordered(0.0), 0u32, 0u32, s.0, s.1)));
    while let Some(Reverse((_, a, b, x, y))) = heap.pop() {
        if dist[idx(x, y)] != Some((a, b)) {
            continue;
        }
        if (x, y) == g {
            return Some((a, b));
        }
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !ok(nx, ny) {
                    continue;
                }
                let diag = dx != 0 && dy != 0;
                if diag && !(ok(x as i64 + dx, y as i64) && ok(x as i64, y as i64 + dy)) {
                    continue;
                }
                let c = if diag { (a, b + 1) } else { (a + 1, b) };
                let j = idx(nx as usize, ny as usize);
                if dist[j].is_none_or(|d| cost(c) < cost(d)) {
                    dist[j] = Some(c);
                    heap.push(Reverse((ordered(cost(c)), c.0, c.1, nx as usize, ny as usize)));
                }
            }
        }
    }
    None
}

fn ordered(v: f64) -> u64 {
    // non-negative floats sort like their bit patterns
    v.to_bits()
}

fn planner_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let (w, h) = (64, 64);
    let mut exact = 0;
    let mut reachable = 0;
    for _ in 0..50 {
        let free: Vec<bool> = (0..w * h).map(|_| !rng.gen_bool(0.3)).collect();
        let mut grid = OccupancyGrid::new(w, h, 1.0, Point2::new(0.0, 0.0)).unwrap();
        for y in 0..h {
            for x in 0..w {
                grid.set((x, y), !free[y * w + x]);
            }
        }
        let pick = |rng: &mut ChaCha8Rng| loop {
            let c = (rng.gen_range(0..w), rng.gen_range(0..h));
            if free[c.1 * w + c.0] {
                return c;
            }
        };
        let (s, g) = (pick(&mut rng), pick(&mut rng));
        let a = astar(&grid, s, g).map(|(_, c)| (c.straight, c.diagonal));
        let d = dijkstra(&free, w, h, s, g);
        reachable += usize::from(d.is_some());
        exact += usize::from(a == d);
    }
    outcome(exact == 50, format!("exact cost match {exact}/50 grids ({reachable} reachable pairs)"))
}

/// Distance to the first occupied cell (or the map edge) by 1 mm steps.
fn march(grid: &OccupancyGrid, p: Point2, dir: Point2, range: f64) -> f64 {
    let mut t = 0.0;
    while t < range {
        if !grid.contains_point(p + dir * t) || !grid.is_free_at(p + dir * t) {
            return t;
        }
        t += 0.001;
    }
    range
}

fn clearance_oracle() -> Outcome {
    let sc = scenario("suite_a.json");
    let sim = Simulator::from_parts(sc.grid.clone(), Vec::new(), sc.robot_start, SimConfig::default());
    let grid = sim.grid();
    let (lo, hi) = grid.bounds();
    let tol = grid.resolution() / 2.0;
    let range = sim.config().clearance_range;
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst: f64 = 0.0;
    let mut poses = 0;
    while poses < 200 {
        let p = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if !grid.is_free_at(p) {
            continue;
        }
        let pose = Pose2D::new(p.x, p.y, rng.gen_range(0.0..360.0));
        let c = sim.sense_clearances(pose);
        for (got, off) in [(c.front, 0.0), (c.rear, 180.0), (c.left, 90.0), (c.right, -90.0)] {
            let want = march(grid, p, pose.direction(off), range);
            worst = worst.max((got - want).abs());
        }
        poses += 1;
    }
    outcome(worst <= tol, format!("200 poses x 4 directions, worst deviation {:.4} m (limit {tol} m)", worst))
}

fn transform_oracle() -> Outcome {
    let sc = scenario("suite_a.json");
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let sheared = DrawingTransform::new([[0.031, -0.012], [0.017, -0.044]], [3.5, 27.25]).unwrap();
    let mut worst: f64 = 0.0;
    for t in [&sc.transform, &sheared] {
        for _ in 0..1000 {
            let px = Point2::new(rng.gen_range(-100.0..1100.0), rng.gen_range(-100.0..900.0));
            let back = t.world_to_drawing(t.drawing_to_world(px));
            worst = worst.max(back.distance(px) * t.determinant().abs().sqrt());
        }
    }
    let gateway = Gateway::new(Box::new(OracleBackend::new(&sc)));
    let registry = taskpos_core::navigation::prepare_registry(&sc, &gateway).unwrap();
    let mut pairs = 0;
    let mut exact = 0;
    for a in &sc.labels {
        for b in &sc.labels {
            if a.name == b.name {
                continue;
            }
            pairs += 1;
            let want = Point2::new((a.world_pos.x + b.world_pos.x) / 2.0, (a.world_pos.y + b.world_pos.y) / 2.0);
            let got = resolve_destination(&format!("center between {} and {}", a.name, b.name), &registry, &gateway, sc.robot_start.position());
            exact += usize::from(got.is_ok_and(|d| d.position == want));
        }
    }
    outcome(
        worst < 1e-9 && exact == pairs,
        format!("round-trip worst {worst:.2e} m over 2x1000 points; midpoints exact {exact}/{pairs} label pairs"),
    )
}

const OPEN_ROOM: &str = r#"{
  "name": "open room",
  "grid": {"resolution": 0.1, "origin": [0, 0], "rows": ROWS},
  "transform": {"affine": {"linear": [[0.1, 0], [0, 0.1]], "translation": [0, 0]}},
  "labels": [{"name": "R1", "px": 100, "py": 100}],
  "objects": [{"id": "cone", "class": "traffic_cone", "attributes": ["orange"], "pose": [10, 14]}],
  "robot_start": {"x": 10, "y": 10, "heading": 90}
}"#;

fn open_room() -> Scenario {
    let n = 200;
    let rows: Vec<String> = (0..n)
        .map(|r| (0..n).map(|c| if r == 0 || c == 0 || r == n - 1 || c == n - 1 { '#' } else { '.' }).collect())
        .collect();
    let text = OPEN_ROOM.replace("ROWS", &serde_json::to_string(&rows).unwrap());
    parse_scenario(text.as_bytes()).expect("open room parses")
}

fn positioning_bound() -> Outcome {
    let sc = open_room();
    let gateway = Gateway::new(Box::new(OracleBackend::new(&sc)));
    let pred = TargetPredicate::class_only("traffic_cone").require("orange");
    let cfg = PositioningConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let (mut ok, mut worst_slack) = (0, i64::MAX);
    let mut first_bad = None;
    for i in 0..100 {
        let start = Pose2D::new(rng.gen_range(8.0..12.0), rng.gen_range(8.0..12.0), rng.gen_range(0.0..360.0));
        let d0: f64 = rng.gen_range(1.0..5.0);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let target = start.position() + Point2::new(a.cos(), a.sin()) * d0;
        let mut obj: WorldObject = sc.objects[0].clone();
        obj.pose = target;
        let mut sim = Simulator::from_parts(sc.grid.clone(), vec![obj], start, SimConfig::default());
        let bearing = bearing_right(start.position(), start.heading, target).abs();
        let bound = (bearing / 15.0).ceil() as i64 + 9 + ((d0 - 0.65).abs() / 0.25).ceil() as i64 + 3;
        let goal = PositioningGoal { task_id: "P", instruction: "inspect the orange traffic cone", target: Some(&pred) };
        let rep = position_to_target(&mut sim, &gateway, goal, &cfg, None, &|| false).expect("oracle answers");
        let end = rep.final_pose;
        let dist = end.position().distance(target);
        let centered = region_for_bearing(bearing_right(end.position(), end.heading, target), 90.0) == Some(Region::Center);
        let good = rep.completed && (rep.iterations as i64) <= bound && (0.40..=0.90).contains(&dist) && centered;
        worst_slack = worst_slack.min(bound - rep.iterations as i64);
        if good {
            ok += 1;
        } else if first_bad.is_none() {
            first_bad = Some(format!(
                "placement {i}: iterations {} bound {bound} distance {dist:.2} centered {centered}",
                rep.iterations
            ));
        }
    }
    let mut detail = format!("{ok}/100 placements within bound, smallest slack {worst_slack} iterations");
    if let Some(b) = first_bad {
        detail.push_str(&format!("; first miss {b}"));
    }
    outcome(ok == 100, detail)
}

fn replay() -> Outcome {
    let sc = scenario("suite_a.json");
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("transcript.ndjson");
    let recorded = run_suite(&sc, &BackendSpec::Oracle, RunConfig::default(), None).unwrap();
    recorded.gateway.save_transcript(&transcript).unwrap();
    let replayed = run_suite(&sc, &BackendSpec::Replay(transcript), RunConfig::default(), None).unwrap();
    let (a, b) = (recorded.events.digest(), replayed.events.digest());
    let reports = recorded.report.digest == replayed.report.digest;
    outcome(a == b && reports, format!("event-log digest {}.. vs {}.., report digests equal {reports}", &a[..12], &b[..12]))
}

fn metrics() -> Outcome {
    let (r, records, _) = timed_suite("suite_a.json");
    let rebuilt = SuiteReport::from_records("A", &records);
    let per_task = r.task_reports.iter().all(|t| t.travel_m > 0.0 && t.time_s > 0.0);
    let per_session = r.session_reports.iter().all(|s| s.travel_m > 0.0 && s.time_s > 0.0);
    // session travel equals the odometer at the last terminal record
    let odometer_ok = r.session_reports.iter().all(|s| {
        let last = records
            .iter()
            .filter(|x| x.session.as_deref() == Some(s.session.as_str()))
            .filter_map(|x| match &x.event {
                Event::TaskTerminal { odometer: Some(o), .. } => Some(*o),
                _ => None,
            })
            .next_back();
        last.is_some_and(|o| (o - s.travel_m).abs() <= 1e-6)
    });
    let hist_ok = r.failure_histogram.values().sum::<usize>() == r.tasks_failed;
    let m = &r.means;
    let pass = per_task && per_session && odometer_ok && hist_ok && rebuilt.digest == r.digest && m.travel_per_task_m > 0.0;
    outcome(
        pass,
        format!(
            "travel {:.1} m/session (ref {}) {:.1} m/task (ref {}), time {:.0} s/session (ref {}) {:.0} s/task (ref {}); rebuilt from log {}",
            m.travel_per_session_m,
            r.reference.travel_per_session_m,
            m.travel_per_task_m,
            r.reference.travel_per_task_m,
            m.time_per_session_s,
            r.reference.time_per_session_s,
            m.time_per_task_s,
            r.reference.time_per_task_s,
            rebuilt.digest == r.digest
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("suite A oracle: task and session SR 100%, under 2 min", suite_a),
        ("suite B oracle: faced object satisfies predicate, 0 distractors, under 2 min", suite_b),
        ("suite C oracle: executed order correct 15/15, stop latency <= 1 behavior", suite_c),
        ("noise degradation: SR non-increasing in p, >= 70% positioning failures", noise),
        ("planner: A* cost equals Dijkstra on 50 random 64x64 grids", planner_oracle),
        ("clearances: ray cast within resolution/2 of 1 mm marching, 200 poses", clearance_oracle),
        ("transform: round trip < 1e-9 on 1000 points, exact midpoints", transform_oracle),
        ("positioning: iteration bound, distance and facing on 100 placements", positioning_bound),
        ("replay: recorded and replayed suite A logs have equal digests", replay),
        ("metrics: per-session and per-task travel and time in SuiteReport", metrics),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("{} {name} -- {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
