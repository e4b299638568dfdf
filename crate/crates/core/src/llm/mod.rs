//! Chat and embedding access behind backend-neutral traits.

pub mod embed;
pub mod http;
pub mod scripted;
pub mod tokens;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use embed::{cosine, Embedder, EmbeddingBackend, EmbeddingVector, LocalHashEmbedder};
pub use http::{OpenAiChat, OpenAiEmbeddings};
pub use scripted::{ReplayEntry, ScriptedBackend};
pub use tokens::{ApproxTokenCounter, TokenCounter};

pub const API_KEY_ENV: &str = "GROUNDFLOW_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        Self { model_id: "gpt-3.5-turbo".to_string(), temperature: 0.0, max_tokens: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("no scripted reply for prompt hash {hash}")]
    Unmatched { hash: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { retryable: true, .. })
    }
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, history: &[ChatMessage], params: &ChatParams) -> Result<String, LlmError>;

    /// Cheap readiness probe used before a session starts.
    fn health(&self) -> Result<(), LlmError> {
        Ok(())
    }
}

/// A backend that is never reachable.
#[derive(Debug, Default, Clone)]
pub struct OfflineBackend;

impl ChatBackend for OfflineBackend {
    fn chat(&self, _: &[ChatMessage], _: &ChatParams) -> Result<String, LlmError> {
        Err(LlmError::Unavailable("offline backend".into()))
    }

    fn health(&self) -> Result<(), LlmError> {
        Err(LlmError::Unavailable("offline backend".into()))
    }
}

/// Replies computed by a closure over the history.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, LlmError> + Send + Sync,
{
    fn chat(&self, history: &[ChatMessage], _: &ChatParams) -> Result<String, LlmError> {
        (self.0)(history)
    }
}

fn normalize_content(s: &str) -> String {
    s.replace("\r\n", "\n").lines().map(str::trim_end).collect::<Vec<_>>().join("\n").trim().to_string()
}

/// Stable SHA-256 over roles and line-normalized contents.
pub fn history_hash(history: &[ChatMessage]) -> String {
    let mut h = Sha256::new();
    for m in history {
        h.update(m.role.as_str().as_bytes());
        h.update([0x1f]);
        h.update(normalize_content(&m.content).as_bytes());
        h.update([0x1e]);
    }
    hex::encode(h.finalize())
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    history: &'a [ChatMessage],
    reply: &'a str,
}

/// Validates requests, forwards them to a backend and appends every exchange
/// to an optional JSONL transcript.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    params: ChatParams,
    transcript: Option<Arc<Mutex<File>>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, params: ChatParams) -> Self {
        Self { backend, params, transcript: None }
    }

    pub fn with_transcript(mut self, path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript = Some(Arc::new(Mutex::new(file)));
        Ok(self)
    }

    pub fn params(&self) -> &ChatParams {
        &self.params
    }

    pub fn backend(&self) -> &Arc<dyn ChatBackend> {
        &self.backend
    }

    pub fn health(&self) -> Result<(), LlmError> {
        self.backend.health()
    }

    pub fn chat(&self, history: &[ChatMessage]) -> Result<String, LlmError> {
        if history.is_empty() {
            return Err(LlmError::Precondition("chat history is empty".into()));
        }
        if let Some(i) = history.iter().position(|m| m.content.trim().is_empty()) {
            return Err(LlmError::Precondition(format!("message {i} has empty content")));
        }
        let reply = self.backend.chat(history, &self.params)?;
        if reply.trim().is_empty() {
            return Err(LlmError::EmptyCompletion);
        }
        if let Some(t) = &self.transcript {
            let line =
                serde_json::to_string(&TranscriptLine { history, reply: &reply }).expect("transcript line serializes");
            let mut f = t.lock().unwrap();
            writeln!(f, "{line}").map_err(|e| LlmError::Transport {
                message: format!("transcript write failed: {e}"),
                retryable: false,
            })?;
        }
        Ok(reply)
    }
}

/// Reads a transcript written by [`Gateway::with_transcript`].
pub fn read_transcript(path: &Path) -> std::io::Result<Vec<(Vec<ChatMessage>, String)>> {
    #[derive(Deserialize)]
    struct Owned {
        history: Vec<ChatMessage>,
        reply: String,
    }
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let o: Owned = serde_json::from_str(l).map_err(std::io::Error::other)?;
            Ok((o.history, o.reply))
        })
        .collect()
}
