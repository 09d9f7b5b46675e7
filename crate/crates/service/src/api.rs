//! HTTP API for interactive use. Handlers stay thin: commands go to the
//! agent core, reads come from published snapshots. One driver thread owns
//! the simulator; the run-mode lock keeps it exclusive.

use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;

use taskpos_core::agent::{AgentCore, CommandError, StopReason, StopSignal};
use taskpos_core::events::{Event, EventLog, EventRecord, SimClock};
use taskpos_core::navigation::prepare_registry;
use taskpos_core::reasoning::Gateway;
use taskpos_core::sim::{Simulator, StatusBoard};
use taskpos_core::world::{load_scenario, Scenario};

use crate::backend::BackendSpec;
use crate::harness::RunConfig;
use crate::report::SuiteReport;

const SESSION: &str = "interactive";

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub backend: BackendSpec,
    pub run: RunConfig,
    /// Simulated seconds per wall second; 0 runs unpaced.
    pub speed: f64,
    pub log_dir: Option<PathBuf>,
}

/// One loaded scenario with its live agent and driver thread.
struct Live {
    scenario: Arc<Scenario>,
    core: Arc<AgentCore>,
    events: EventLog,
    board: StatusBoard,
    shutdown: Arc<AtomicBool>,
    driver: Option<JoinHandle<()>>,
}

impl Live {
    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(id) = self.core.running_id() {
            self.core.stop_channel().raise(StopSignal { task_id: id, reason: StopReason::Shutdown });
        }
        if let Some(h) = self.driver.take() {
            let _ = h.join();
        }
        let _ = self.events.flush();
    }
}

pub struct AppState {
    config: ServeConfig,
    live: Mutex<Option<Live>>,
    /// Held by whoever drives the simulator.
    run_mode: Arc<Mutex<()>>,
    feed: broadcast::Sender<EventRecord>,
    report: Mutex<Option<SuiteReport>>,
}

impl AppState {
    pub fn new(config: ServeConfig) -> Arc<Self> {
        let (feed, _) = broadcast::channel(4096);
        Arc::new(Self { config, live: Mutex::new(None), run_mode: Arc::new(Mutex::new(())), feed, report: Mutex::new(None) })
    }

    pub fn set_report(&self, report: SuiteReport) {
        *self.report.lock().expect("report poisoned") = Some(report);
    }

    /// Replaces the live scenario: stops the old driver, builds a fresh agent
    /// and starts driving.
    pub fn load(&self, path: &Path) -> anyhow::Result<String> {
        let scenario = Arc::new(load_scenario(path)?);
        let gateway = Arc::new(Gateway::new(self.config.backend.build(&scenario, self.config.run.seed)?));
        gateway.begin_session("registry");
        let registry = prepare_registry(&scenario, &gateway)?;

        let mut events = EventLog::new(SimClock::default());
        if let Some(dir) = &self.config.log_dir {
            events = events.with_file(dir.join(format!("{}.ndjson", scenario.name)))?;
        }
        events.retain_status_in_memory(false);
        let feed = self.feed.clone();
        events.subscribe(move |r| {
            let _ = feed.send(r.clone());
        });

        let mut live = self.live.lock().expect("live state poisoned");
        if let Some(mut old) = live.take() {
            old.stop();
        }

        let mut sim = Simulator::new(&scenario, self.config.run.sim.clone());
        let board = StatusBoard::default();
        sim.attach_board(board.clone());
        sim.attach_events(events.clone());
        events.set_session(Some(SESSION.into()));
        gateway.begin_session(SESSION);
        events.emit(Event::SessionStarted { session: SESSION.into(), suite: scenario.suite.clone(), odometer: 0.0 });
        let core = Arc::new(AgentCore::new(gateway, registry, events.clone(), self.config.run.positioning.clone()));

        let shutdown = Arc::new(AtomicBool::new(false));
        if self.config.speed > 0.0 {
            let pause = Duration::from_secs_f64(sim.config().tick / self.config.speed);
            sim.add_tick_hook(Box::new(move |_| std::thread::sleep(pause)));
        }
        let driver = {
            let core = core.clone();
            let shutdown = shutdown.clone();
            let run_mode = self.run_mode.clone();
            std::thread::spawn(move || drive(sim, core, shutdown, run_mode))
        };
        let name = scenario.name.clone();
        *live = Some(Live { scenario, core, events, board, shutdown, driver: Some(driver) });
        Ok(name)
    }

    fn with_live<T>(&self, f: impl FnOnce(&Live) -> T) -> Result<T, ApiError> {
        let live = self.live.lock().expect("live state poisoned");
        live.as_ref().map(f).ok_or(ApiError::NoScenario)
    }

    pub fn shutdown(&self) {
        if let Some(mut l) = self.live.lock().expect("live state poisoned").take() {
            l.stop();
        }
    }
}

fn drive(mut sim: Simulator, core: Arc<AgentCore>, shutdown: Arc<AtomicBool>, run_mode: Arc<Mutex<()>>) {
    while !shutdown.load(Ordering::SeqCst) {
        if core.has_pending() {
            let _guard = run_mode.lock().expect("run-mode lock poisoned");
            core.run_next(&mut sim);
        } else {
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

#[derive(Debug)]
enum ApiError {
    NoScenario,
    BadRequest(String),
    Unprocessable(String),
    NotFound(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, msg) = match self {
            ApiError::NoScenario => (StatusCode::CONFLICT, "no scenario loaded".to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
        };
        (code, Json(json!({ "error": msg }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct CommandBody {
    text: String,
}

async fn post_command(State(st): State<Arc<AppState>>, Json(body): Json<CommandBody>) -> Result<Response, ApiError> {
    if body.text.trim().is_empty() {
        return Err(ApiError::BadRequest("empty command".into()));
    }
    let core = st.with_live(|l| l.core.clone())?;
    let result = tokio::task::spawn_blocking(move || core.handle_command(&body.text))
        .await
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    match result {
        Ok(revision) => Ok((StatusCode::ACCEPTED, Json(json!({ "revision": revision }))).into_response()),
        Err(CommandError::Empty) => Err(ApiError::BadRequest("empty command".into())),
        Err(e) => Err(ApiError::Unprocessable(e.to_string())),
    }
}

async fn get_status(State(st): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let status = st.with_live(|l| l.board.status())?;
    Ok(Json(status).into_response())
}

#[derive(Debug, Serialize)]
struct TasksView {
    revision: u64,
    running: Option<String>,
    active: Vec<taskpos_core::agent::Task>,
    history: Vec<taskpos_core::agent::Task>,
}

async fn get_tasks(State(st): State<Arc<AppState>>) -> Result<Json<TasksView>, ApiError> {
    let list = st.with_live(|l| l.core.snapshot())?;
    Ok(Json(TasksView {
        revision: list.revision(),
        running: list.running().map(|t| t.id.clone()),
        active: list.active().to_vec(),
        history: list.history().to_vec(),
    }))
}

async fn get_map(State(st): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    st.with_live(|l| {
        let g = &l.scenario.grid;
        Json(json!({
            "name": l.scenario.name,
            "grid": {
                "width": g.width(),
                "height": g.height(),
                "resolution": g.resolution(),
                "origin": [g.origin().x, g.origin().y],
                "rows": g.to_rows(),
            },
            "labels": l.scenario.labels,
            "objects": l.board.objects(),
            "pose": l.board.status().map(|s| s.pose),
        }))
    })
}

#[derive(Debug, Deserialize)]
struct LoadBody {
    path: PathBuf,
}

async fn post_load(State(st): State<Arc<AppState>>, Json(body): Json<LoadBody>) -> Result<Json<serde_json::Value>, ApiError> {
    let st2 = st.clone();
    let name = tokio::task::spawn_blocking(move || st2.load(&body.path))
        .await
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(json!({ "loaded": name })))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// Replay retained records with `seq >= since` before going live.
    since: Option<u64>,
}

fn sse(r: &EventRecord) -> Result<SseEvent, Infallible> {
    Ok(SseEvent::default()
        .event(r.event.name())
        .id(r.seq.to_string())
        .data(serde_json::to_string(r).expect("event records serialize")))
}

async fn get_events(
    State(st): State<Arc<AppState>>,
    Query(q): Query<EventsQuery>,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let rx = st.feed.subscribe();
    let backlog: Vec<EventRecord> = match q.since {
        Some(seq) => st.with_live(|l| l.events.records_since(seq)).unwrap_or_default(),
        None => Vec::new(),
    };
    let last = backlog.last().map(|r| r.seq);
    let live = BroadcastStream::new(rx).filter_map(move |r| {
        let out = match r {
            Ok(rec) if last.is_none_or(|l| rec.seq > l) => Some(sse(&rec)),
            _ => None,
        };
        async move { out }
    });
    let stream = stream::iter(backlog.iter().map(sse).collect::<Vec<_>>()).chain(live);
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn get_report(State(st): State<Arc<AppState>>) -> Result<Json<SuiteReport>, ApiError> {
    st.report
        .lock()
        .expect("report poisoned")
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound("no suite report yet".into()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/command", post(post_command))
        .route("/api/status", get(get_status))
        .route("/api/tasks", get(get_tasks))
        .route("/api/map", get(get_map))
        .route("/api/scenario/load", post(post_load))
        .route("/api/events", get(get_events))
        .route("/api/report", get(get_report))
        .with_state(state)
}

/// Binds and serves until the process ends.
pub async fn serve(state: Arc<AppState>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind port {port}: {e}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
