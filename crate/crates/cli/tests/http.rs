use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use groundflow_cli::app::App;
use groundflow_cli::config::{ChatBackendKind, Config};
use groundflow_cli::server::{router, AppState};
use groundflow_core::evaluator::feedback_scenarios;
use groundflow_core::fixtures;
use groundflow_core::lecture::ncen_registry;
use groundflow_core::llm::{ChatMessage, FnBackend, Gateway};
use groundflow_core::orchestrator::Orchestrator;
use groundflow_core::{ChatParams, LectureVariant, NcenApi};

fn config(store: &std::path::Path, backend: ChatBackendKind) -> Config {
    let mut c = Config { store_dir: store.to_path_buf(), ..Config::default() };
    c.gateway.backend = backend;
    c
}

fn state(c: Config) -> Arc<AppState> {
    let app = App::new(c).unwrap();
    let items = app.dataset().unwrap();
    AppState::new(app.orchestrator(&items).unwrap(), app.variant())
}

async fn call(r: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = r.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn create(r: &Router) -> String {
    let (st, v) = call(r, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    assert_eq!(v["version"], 1);
    assert_eq!(v["state"], "READY");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_session_variants_and_offline_gateway() {
    let dir = tempfile::tempdir().unwrap();
    let r = router(state(config(dir.path(), ChatBackendKind::Replay)));
    create(&r).await;
    let (st, _) = call(&r, Method::POST, "/sessions", None).await;
    assert_eq!(st, StatusCode::CREATED);
    let (st, v) = call(&r, Method::POST, "/sessions", Some(json!({"variant": "NCT"}))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    let (st, v) = call(&r, Method::POST, "/sessions", Some(json!({"variant": "SHORT"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("SHORT"));

    let off = router(state(config(dir.path(), ChatBackendKind::Offline)));
    let (st, v) = call(&off, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(st, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["state"], "FAILED");
}

#[tokio::test]
async fn query_answers_the_easy_question_and_refuses_a_second_one() {
    let dir = tempfile::tempdir().unwrap();
    let r = router(state(config(dir.path(), ChatBackendKind::Replay)));
    let id = create(&r).await;
    let q = json!({"question": "Who is the custodian for PRECIOUS METALS FUND?"});
    let (st, posted) = call(&r, Method::POST, &format!("/sessions/{id}/query"), Some(q.clone())).await;
    assert_eq!(st, StatusCode::OK, "{posted}");
    assert_eq!(posted["state"], "AWAITING_FEEDBACK");
    let draft = &posted["latest_draft"];
    assert_eq!(draft["answer"], "U.S. BANK NATIONAL ASSOCIATION");
    assert!(draft["code"].as_str().unwrap().contains("extract_entity"));
    assert!(draft["summary"].is_string());

    let (st, _) = call(&r, Method::POST, &format!("/sessions/{id}/query"), Some(q.clone())).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _) = call(&r, Method::POST, "/sessions/nope/query", Some(q)).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, v) = call(&r, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"text": "  "}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");

    let (st, got) = call(&r, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(got, posted);
}

#[tokio::test]
async fn february_feedback_over_http_then_approve() {
    let dir = tempfile::tempdir().unwrap();
    let r = router(state(config(dir.path(), ChatBackendKind::Replay)));
    let scenario = feedback_scenarios().into_iter().find(|s| s.name == "february").unwrap();
    let id = create(&r).await;
    let (st, v) =
        call(&r, Method::POST, &format!("/sessions/{id}/query"), Some(json!({"question": scenario.item.question})))
            .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["latest_draft"]["summary"], scenario.summary.as_str());
    assert!(v["latest_draft"]["answer"].is_null() || v["latest_draft"]["answer"] != "9120455.18");

    let (st, v) =
        call(&r, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"text": scenario.feedback}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["latest_draft"]["answer"], "9120455.18");
    assert_eq!(v["drafts"].as_array().unwrap().len(), 2);
    assert_eq!(v["feedback_history"], json!([scenario.feedback]));
    assert_ne!(v["drafts"][0]["code"], v["drafts"][1]["code"]);

    let (st, fin) = call(&r, Method::POST, &format!("/sessions/{id}/approve"), None).await;
    assert_eq!(st, StatusCode::OK, "{fin}");
    assert_eq!(fin["final_answer"]["answer_text"], "9120455.18");
    let (st, again) = call(&r, Method::POST, &format!("/sessions/{id}/approve"), None).await;
    assert_eq!((st, &again), (StatusCode::OK, &fin));
    let (st, _) = call(&r, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"text": "more"}))).await;
    assert_eq!(st, StatusCode::CONFLICT);

    // a fresh process over the same store sees the finished session
    let r2 = router(state(config(dir.path(), ChatBackendKind::Replay)));
    let (st, v) = call(&r2, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["state"], "DONE");
    assert_eq!(v["drafts"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn generation_failure_is_422_with_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let api = Arc::new(NcenApi::new(Arc::new(fixtures::bundled_corpus())));
    let prose = FnBackend(|_: &[ChatMessage]| Ok("I would look it up in the filing.".to_string()));
    let o = Orchestrator::new(Gateway::new(Arc::new(prose), ChatParams::default()), api, ncen_registry())
        .with_store(groundflow_core::orchestrator::SessionStore::new(dir.path()));
    let r = router(AppState::new(o, LectureVariant::Full));
    let id = create(&r).await;
    let (st, v) =
        call(&r, Method::POST, &format!("/sessions/{id}/query"), Some(json!({"question": "Anything?"}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["session"]["state"], "FAILED");
    assert!(v["error"].is_string());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn overlapping_requests_for_one_session_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let api = Arc::new(NcenApi::new(Arc::new(fixtures::bundled_corpus())));
    let slow = FnBackend(|h: &[ChatMessage]| {
        if h.len() > 1 {
            std::thread::sleep(Duration::from_millis(400));
        }
        Ok("```\nanswer = 1\n```".to_string())
    });
    let o = Orchestrator::new(Gateway::new(Arc::new(slow), ChatParams::default()), api, ncen_registry())
        .with_store(groundflow_core::orchestrator::SessionStore::new(dir.path()));
    let r = router(AppState::new(o, LectureVariant::Full));
    let id = create(&r).await;
    let uri = format!("/sessions/{id}/query");
    let first = call(&r, Method::POST, &uri, Some(json!({"question": "one"})));
    let second = async {
        tokio::time::sleep(Duration::from_millis(100)).await;
        call(&r, Method::POST, &uri, Some(json!({"question": "two"}))).await
    };
    let ((a, _), (b, bv)) = tokio::join!(first, second);
    assert_eq!(a, StatusCode::OK);
    assert_eq!(b, StatusCode::CONFLICT);
    assert!(bv["error"].as_str().unwrap().contains("in progress"));
}
