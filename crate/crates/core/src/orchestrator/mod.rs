//! The generate / execute / summarize / feedback loop around one question.
//!
//! A session lectures the model once, then moves through
//! `READY -> AWAITING_FEEDBACK -> ... -> DONE`, or to `FAILED` when the model
//! never produces usable code or the gateway is unreachable at start.

mod store;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{SessionStore, StoreError};

use crate::lecture::{render_lecture, ApiDescriptor, LectureConfig, LectureError, LecturePrompt};
use crate::llm::{ChatMessage, Gateway, LlmError};
use crate::ncen_api::NcenApi;
use crate::workflow::{
    execute, extract_code, ExecLimits, ExecResult, NcenBindings, TraceEntry, Value, WorkflowProgram,
};

pub const SUMMARY_PROMPT: &str = "Could you provide a concise high-level summary of the flow of code? Then take feedback to see if code needs to be updated";

/// Opening line of the automatic repair request.
pub const REPAIR_PREFIX: &str = "The code could not be used:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    Ready,
    AwaitingFeedback,
    Done,
    Failed,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ready => "READY",
            Self::AwaitingFeedback => "AWAITING_FEEDBACK",
            Self::Done => "DONE",
            Self::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowDraft {
    /// 1-based.
    pub number: usize,
    /// The reply the code was taken from (after repair, if any).
    pub reply: String,
    /// Extracted code; empty when nothing could be extracted.
    pub code: String,
    #[serde(skip)]
    pub program: Option<WorkflowProgram>,
    /// Extraction, syntax or validation problems left after the repair round.
    pub diagnostics: Vec<String>,
    pub repaired: bool,
    pub summary: Option<String>,
    pub result: Option<ExecResult>,
    /// Runtime failure, if execution was attempted and failed.
    pub error: Option<String>,
    pub trace: Vec<TraceEntry>,
    pub feedback_applied: Option<String>,
}

impl WorkflowDraft {
    pub fn is_executable(&self) -> bool {
        self.program.is_some()
    }

    pub fn answer_text(&self) -> Option<String> {
        self.result.as_ref().map(|r| r.answer.render())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub session_id: String,
    pub question: String,
    pub answer: Value,
    pub answer_text: String,
    pub code: String,
    pub trace: Vec<TraceEntry>,
    pub summary: Option<String>,
    pub feedback_history: Vec<String>,
    pub drafts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub lecture: LecturePrompt,
    pub transcript: Vec<ChatMessage>,
    pub drafts: Vec<WorkflowDraft>,
    pub state: SessionState,
    pub question: Option<String>,
    pub failure: Option<String>,
    pub final_answer: Option<FinalAnswer>,
}

impl Session {
    pub fn latest(&self) -> Option<&WorkflowDraft> {
        self.drafts.last()
    }

    /// Rebuilds the parsed programs after deserialization.
    pub fn reparse(&mut self) {
        for d in &mut self.drafts {
            if d.diagnostics.is_empty() && !d.code.is_empty() {
                d.program = WorkflowProgram::parse(&d.code).ok();
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("session is {actual}, expected {expected}")]
    State { expected: &'static str, actual: &'static str },
    #[error("{0}")]
    Precondition(String),
    #[error("gateway: {0}")]
    Gateway(#[from] LlmError),
    #[error("lecture: {0}")]
    Lecture(#[from] LectureError),
    #[error("session store: {0}")]
    Store(#[from] StoreError),
}

impl OrchestratorError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Gateway(e) if e.is_retryable())
    }
}

fn state_error(expected: &'static str, actual: SessionState) -> OrchestratorError {
    OrchestratorError::State { expected, actual: actual.as_str() }
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(0);

fn new_session_id() -> String {
    let n = SESSION_COUNTER.fetch_add(1, Ordering::Relaxed);
    let salt: u32 = rand::random();
    format!("s{}-{n:04}-{salt:08x}", chrono::Utc::now().format("%Y%m%d%H%M%S"))
}

/// Stateless engine; all per-question state lives in [`Session`].
#[derive(Clone)]
pub struct Orchestrator {
    gateway: Gateway,
    api: Arc<NcenApi>,
    registry: Vec<ApiDescriptor>,
    limits: ExecLimits,
    store: Option<SessionStore>,
}

/// Outcome of turning one reply into a draft.
struct Processed {
    reply: String,
    code: String,
    program: Option<WorkflowProgram>,
    diagnostics: Vec<String>,
    repaired: bool,
}

impl Orchestrator {
    pub fn new(gateway: Gateway, api: Arc<NcenApi>, registry: Vec<ApiDescriptor>) -> Self {
        Self { gateway, api, registry, limits: ExecLimits::default(), store: None }
    }

    pub fn with_limits(mut self, limits: ExecLimits) -> Self {
        self.limits = limits;
        self
    }

    /// Persist every session change under `store`.
    pub fn with_store(mut self, store: SessionStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn store(&self) -> Option<&SessionStore> {
        self.store.as_ref()
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn api(&self) -> &Arc<NcenApi> {
        &self.api
    }

    pub fn registry(&self) -> &[ApiDescriptor] {
        &self.registry
    }

    fn persist(&self, s: &Session) -> Result<(), OrchestratorError> {
        if let Some(store) = &self.store {
            store.save(s)?;
        }
        Ok(())
    }

    /// Renders the lecture and opens a session with it as the only message.
    /// An unreachable gateway yields a `FAILED` session carrying the cause.
    pub fn start_session(&self, cfg: &LectureConfig) -> Result<Session, OrchestratorError> {
        let lecture = render_lecture(&self.registry, cfg)?;
        let mut session = Session {
            id: new_session_id(),
            transcript: vec![ChatMessage::system(lecture.text.clone())],
            lecture,
            drafts: Vec::new(),
            state: SessionState::Ready,
            question: None,
            failure: None,
            final_answer: None,
        };
        if let Err(e) = self.gateway.health() {
            session.state = SessionState::Failed;
            session.failure = Some(format!("gateway unavailable: {e}"));
        }
        self.persist(&session)?;
        Ok(session)
    }

    pub fn ask(&self, s: &mut Session, question: &str) -> Result<WorkflowDraft, OrchestratorError> {
        if s.state != SessionState::Ready {
            return Err(state_error("READY", s.state));
        }
        if question.trim().is_empty() {
            return Err(OrchestratorError::Precondition("question is empty".into()));
        }
        self.turn(s, question.trim().to_string(), None)?;
        s.question = Some(question.trim().to_string());
        self.persist(s)?;
        Ok(s.drafts.last().unwrap().clone())
    }

    pub fn feedback(&self, s: &mut Session, user_text: &str) -> Result<WorkflowDraft, OrchestratorError> {
        if s.state != SessionState::AwaitingFeedback {
            return Err(state_error("AWAITING_FEEDBACK", s.state));
        }
        if user_text.trim().is_empty() {
            return Err(OrchestratorError::Precondition("feedback is empty".into()));
        }
        self.turn(s, user_text.trim().to_string(), Some(user_text.trim().to_string()))?;
        self.persist(s)?;
        Ok(s.drafts.last().unwrap().clone())
    }

    /// Sends one user message, takes code from the reply (with at most one
    /// repair round) and runs it. Messages are only committed once the
    /// gateway has answered, so a transport failure leaves the session as
    /// it was.
    fn turn(&self, s: &mut Session, message: String, feedback: Option<String>) -> Result<(), OrchestratorError> {
        let mut pending = s.transcript.clone();
        pending.push(ChatMessage::user(message));
        let reply = self.gateway.chat(&pending)?;
        pending.push(ChatMessage::assistant(reply.clone()));

        let mut p = self.process(reply);
        if !p.diagnostics.is_empty() {
            let mut request = String::from(REPAIR_PREFIX);
            for d in &p.diagnostics {
                request.push_str("\n- ");
                request.push_str(d);
            }
            request.push_str("\nPlease reply with the corrected code in a single fenced code block.");
            pending.push(ChatMessage::user(request));
            let reply = self.gateway.chat(&pending)?;
            pending.push(ChatMessage::assistant(reply.clone()));
            p = self.process(reply);
            p.repaired = true;
        }
        s.transcript = pending;

        let mut draft = WorkflowDraft {
            number: s.drafts.len() + 1,
            reply: p.reply,
            code: p.code,
            program: None,
            diagnostics: p.diagnostics,
            repaired: p.repaired,
            summary: None,
            result: None,
            error: None,
            trace: Vec::new(),
            feedback_applied: feedback,
        };
        match p.program {
            Some(program) => {
                match execute(&program, &NcenBindings::new(&self.api), self.limits) {
                    Ok(r) => {
                        draft.trace = r.api_call_trace.clone();
                        draft.result = Some(r);
                    }
                    Err(f) => {
                        draft.error = Some(f.to_string());
                        draft.trace = f.trace;
                    }
                }
                draft.program = Some(program);
                s.state = SessionState::AwaitingFeedback;
            }
            None => {
                s.state = SessionState::Failed;
                s.failure = Some(format!("no usable code: {}", draft.diagnostics.join("; ")));
            }
        }
        s.drafts.push(draft);
        Ok(())
    }

    fn process(&self, reply: String) -> Processed {
        let mut out = Processed { reply, code: String::new(), program: None, diagnostics: Vec::new(), repaired: false };
        match extract_code(&out.reply) {
            Err(e) => out.diagnostics.push(format!("{e}; reply with code in a fenced block")),
            Ok(code) => {
                out.code = code;
                match WorkflowProgram::parse(&out.code) {
                    Err(e) => out.diagnostics.push(e.to_string()),
                    Ok(program) => {
                        out.diagnostics = program.validate(&self.registry).iter().map(ToString::to_string).collect();
                        if out.diagnostics.is_empty() {
                            out.program = Some(program);
                        }
                    }
                }
            }
        }
        out
    }

    /// Asks for a plain-language summary of the latest draft, once.
    pub fn summarize(&self, s: &mut Session) -> Result<String, OrchestratorError> {
        let Some(latest) = s.drafts.last() else {
            return Err(OrchestratorError::Precondition("there is no draft to summarize".into()));
        };
        if !latest.is_executable() {
            return Err(OrchestratorError::Precondition("the latest draft has no executable code".into()));
        }
        if let Some(summary) = &latest.summary {
            return Ok(summary.clone());
        }
        let mut pending = s.transcript.clone();
        pending.push(ChatMessage::user(SUMMARY_PROMPT));
        let reply = self.gateway.chat(&pending)?;
        pending.push(ChatMessage::assistant(reply.clone()));
        s.transcript = pending;
        s.drafts.last_mut().unwrap().summary = Some(reply.clone());
        self.persist(s)?;
        Ok(reply)
    }

    pub fn approve(&self, s: &mut Session) -> Result<FinalAnswer, OrchestratorError> {
        match s.state {
            SessionState::Done => {
                return Ok(s.final_answer.clone().expect("DONE sessions carry their final answer"));
            }
            SessionState::AwaitingFeedback => {}
            other => return Err(state_error("AWAITING_FEEDBACK", other)),
        }
        let latest = s.drafts.last().expect("AWAITING_FEEDBACK implies a draft");
        let Some(result) = &latest.result else {
            return Err(OrchestratorError::Precondition(format!(
                "the latest draft did not produce a result: {}",
                latest.error.as_deref().unwrap_or("not executed")
            )));
        };
        let fin = FinalAnswer {
            session_id: s.id.clone(),
            question: s.question.clone().unwrap_or_default(),
            answer: result.answer.clone(),
            answer_text: result.answer.render(),
            code: latest.code.clone(),
            trace: result.api_call_trace.clone(),
            summary: latest.summary.clone(),
            feedback_history: s.drafts.iter().filter_map(|d| d.feedback_applied.clone()).collect(),
            drafts: s.drafts.len(),
        };
        s.final_answer = Some(fin.clone());
        s.state = SessionState::Done;
        self.persist(s)?;
        Ok(fin)
    }
}
