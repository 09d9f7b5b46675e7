use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use taskpos_service::api::{router, AppState, ServeConfig};
use taskpos_service::{BackendSpec, RunConfig};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn state() -> Arc<AppState> {
    AppState::new(ServeConfig { backend: BackendSpec::Oracle, run: RunConfig::default(), speed: 0.0, log_dir: None })
}

async fn call(st: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = router(st.clone()).oneshot(req).await.unwrap();
    let code = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (code, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn commands_need_a_scenario() {
    let st = state();
    let (code, _) = call(&st, "POST", "/api/command", Some(json!({"text": "Move to 12C1 and inspect the tripod."}))).await;
    assert_eq!(code, StatusCode::CONFLICT);
    let (code, _) = call(&st, "GET", "/api/report", None).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn load_bad_path_is_a_client_error() {
    let st = state();
    let (code, body) = call(&st, "POST", "/api/scenario/load", Some(json!({"path": "/nonexistent.json"}))).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
}

#[tokio::test(flavor = "multi_thread")]
async fn command_runs_to_completion() {
    let st = state();
    let path = scenario_path("suite_a.json");
    let (code, body) = call(&st, "POST", "/api/scenario/load", Some(json!({"path": path}))).await;
    assert_eq!(code, StatusCode::OK, "{body}");

    let (code, _) = call(&st, "POST", "/api/command", Some(json!({"text": "  "}))).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);

    let (code, map) = call(&st, "GET", "/api/map", None).await;
    assert_eq!(code, StatusCode::OK);
    assert!(map["grid"]["rows"].as_array().is_some_and(|r| !r.is_empty()));

    // the first scripted command, with that session's objects already in the world
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let text = file["sessions"][0]["command"].as_str().unwrap().to_string();
    let (code, body) = call(&st, "POST", "/api/command", Some(json!({ "text": text }))).await;
    assert_eq!(code, StatusCode::ACCEPTED, "{body}");
    assert_eq!(body["revision"], 1);

    let mut done = Value::Null;
    for _ in 0..400 {
        let (_, tasks) = call(&st, "GET", "/api/tasks", None).await;
        if tasks["active"].as_array().is_some_and(|a| a.is_empty()) && !tasks["history"].as_array().unwrap().is_empty() {
            done = tasks;
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    let history = done["history"].as_array().expect("task finished");
    assert!(!history.is_empty());
    assert!(history.iter().all(|t| t["status"] == "succeeded"), "{done}");

    let (code, status) = call(&st, "GET", "/api/status", None).await;
    assert_eq!(code, StatusCode::OK);
    assert!(status["pose"].is_object());
    st.shutdown();
}
