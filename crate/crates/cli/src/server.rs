//! The HTTP session service. Every body is JSON and carries `version`.
//!
//! | route | success |
//! |---|---|
//! | `POST /sessions` | 201 `{session_id, state}` |
//! | `POST /sessions/{id}/query` | 200 envelope |
//! | `POST /sessions/{id}/feedback` | 200 envelope |
//! | `POST /sessions/{id}/approve` | 200 final answer |
//! | `GET /sessions/{id}` | 200 envelope |

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex as AsyncMutex;

use groundflow_core::orchestrator::{Orchestrator, OrchestratorError, StoreError};
use groundflow_core::{FinalAnswer, LectureConfig, LectureVariant, Session, SessionState, WorkflowDraft};

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftView {
    pub number: usize,
    pub code: String,
    pub summary: Option<String>,
    pub answer: Option<String>,
    pub error: Option<String>,
    pub diagnostics: Vec<String>,
    pub repaired: bool,
    pub feedback_applied: Option<String>,
}

impl From<&WorkflowDraft> for DraftView {
    fn from(d: &WorkflowDraft) -> Self {
        Self {
            number: d.number,
            code: d.code.clone(),
            summary: d.summary.clone(),
            answer: d.answer_text(),
            error: d.error.clone(),
            diagnostics: d.diagnostics.clone(),
            repaired: d.repaired,
            feedback_applied: d.feedback_applied.clone(),
        }
    }
}

/// What the client sees of a session; a projection with nothing added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub version: u32,
    pub session_id: String,
    pub state: SessionState,
    pub question: Option<String>,
    pub latest_draft: Option<DraftView>,
    pub drafts: Vec<DraftView>,
    pub feedback_history: Vec<String>,
    pub failure: Option<String>,
}

impl From<&Session> for SessionEnvelope {
    fn from(s: &Session) -> Self {
        Self {
            version: API_VERSION,
            session_id: s.id.clone(),
            state: s.state,
            question: s.question.clone(),
            latest_draft: s.latest().map(DraftView::from),
            drafts: s.drafts.iter().map(DraftView::from).collect(),
            feedback_history: s.drafts.iter().filter_map(|d| d.feedback_applied.clone()).collect(),
            failure: s.failure.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovedEnvelope {
    pub version: u32,
    pub final_answer: FinalAnswer,
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateRequest {
    pub variant: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    pub question: String,
}

#[derive(Debug, Deserialize)]
pub struct FeedbackRequest {
    pub text: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    envelope: Option<Box<SessionEnvelope>>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), envelope: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "version": API_VERSION, "error": self.message });
        if let Some(env) = self.envelope {
            body["session"] = serde_json::to_value(env).expect("envelope serializes");
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let status = match &e {
            OrchestratorError::State { .. } | OrchestratorError::Precondition(_) => StatusCode::CONFLICT,
            OrchestratorError::Gateway(_) => StatusCode::BAD_GATEWAY,
            OrchestratorError::Lecture(_) | OrchestratorError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

type Slot = Arc<AsyncMutex<Session>>;

pub struct AppState {
    orchestrator: Orchestrator,
    default_variant: LectureVariant,
    sessions: Mutex<HashMap<String, Slot>>,
}

impl AppState {
    pub fn new(orchestrator: Orchestrator, default_variant: LectureVariant) -> Arc<Self> {
        Arc::new(Self { orchestrator, default_variant, sessions: Mutex::new(HashMap::new()) })
    }

    /// Looks in memory first, then in the session store.
    fn slot(&self, id: &str) -> Result<Slot, ApiError> {
        if let Some(s) = self.sessions.lock().unwrap().get(id) {
            return Ok(s.clone());
        }
        let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("no session `{id}`"));
        let store = self.orchestrator.store().ok_or_else(not_found)?;
        let session = match store.load(id) {
            Ok(s) => s,
            Err(StoreError::NotFound(_) | StoreError::BadId(_)) => return Err(not_found()),
            Err(e) => return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
        };
        let mut map = self.sessions.lock().unwrap();
        Ok(map.entry(id.to_string()).or_insert_with(|| Arc::new(AsyncMutex::new(session))).clone())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/approve", post(approve))
        .with_state(state)
}

fn busy() -> ApiError {
    ApiError::new(StatusCode::CONFLICT, "another request for this session is in progress")
}

/// Runs `f` on the session off the async runtime. Overlapping requests for
/// one session get 409.
async fn with_session<T: Send + 'static>(
    state: &Arc<AppState>,
    id: &str,
    f: impl FnOnce(&Orchestrator, &mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let slot = state.slot(id)?;
    let mut guard = slot.try_lock_owned().map_err(|_| busy())?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || f(&st.orchestrator, &mut guard))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn create(State(state): State<Arc<AppState>>, body: Option<Json<CreateRequest>>) -> Result<Response, ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let variant = match req.variant {
        Some(v) => v.parse::<LectureVariant>().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?,
        None => state.default_variant,
    };
    let st = state.clone();
    let session = tokio::task::spawn_blocking(move || st.orchestrator.start_session(&LectureConfig::new(variant)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let body = json!({ "version": API_VERSION, "session_id": session.id, "state": session.state });
    if session.state == SessionState::Failed {
        let message = session.failure.clone().unwrap_or_default();
        return Ok((
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({
                "version": API_VERSION, "session_id": session.id, "state": session.state, "error": message,
            })),
        )
            .into_response());
    }
    state.sessions.lock().unwrap().insert(session.id.clone(), Arc::new(AsyncMutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn show(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionEnvelope>, ApiError> {
    let slot = state.slot(&id)?;
    let s = slot.try_lock().map_err(|_| busy())?;
    Ok(Json(SessionEnvelope::from(&*s)))
}

/// After a new draft: summary for executable drafts, 422 when generation
/// failed outright.
fn finish_turn(o: &Orchestrator, s: &mut Session) -> Result<SessionEnvelope, ApiError> {
    if s.state == SessionState::Failed {
        return Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: s.failure.clone().unwrap_or_else(|| "generation failed".into()),
            envelope: Some(Box::new(SessionEnvelope::from(&*s))),
        });
    }
    if s.latest().is_some_and(WorkflowDraft::is_executable) {
        o.summarize(s)?;
    }
    Ok(SessionEnvelope::from(&*s))
}

fn require_text(text: &str, what: &str) -> Result<(), ApiError> {
    if text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{what} is empty")));
    }
    Ok(())
}

async fn query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<QueryRequest>,
) -> Result<Json<SessionEnvelope>, ApiError> {
    require_text(&req.question, "question")?;
    with_session(&state, &id, move |o, s| {
        o.ask(s, &req.question)?;
        finish_turn(o, s)
    })
    .await
    .map(Json)
}

async fn feedback(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<FeedbackRequest>,
) -> Result<Json<SessionEnvelope>, ApiError> {
    require_text(&req.text, "feedback")?;
    with_session(&state, &id, move |o, s| {
        o.feedback(s, &req.text)?;
        finish_turn(o, s)
    })
    .await
    .map(Json)
}

async fn approve(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ApprovedEnvelope>, ApiError> {
    with_session(&state, &id, |o, s| Ok(o.approve(s)?))
        .await
        .map(|final_answer| Json(ApprovedEnvelope { version: API_VERSION, final_answer }))
}

/// Binds and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
