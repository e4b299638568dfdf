use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::Session;
use crate::workflow::write_trace;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("invalid session id {0:?}")]
    BadId(String),
    #[error("no session {0}")]
    NotFound(String),
}

/// One directory per session:
/// `session.json`, `transcript.jsonl`, `draft-<n>.dsl`,
/// `draft-<n>.trace.jsonl` and, once approved, `final.json`.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
    let io = |source| StoreError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn session_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::BadId(id.to_string()));
        }
        Ok(self.dir.join(id))
    }

    pub fn save(&self, s: &Session) -> Result<(), StoreError> {
        let dir = self.session_dir(&s.id)?;
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.display().to_string(), source })?;

        let mut transcript = String::new();
        for m in &s.transcript {
            transcript.push_str(&serde_json::to_string(m).expect("messages serialize"));
            transcript.push('\n');
        }
        write(&dir.join("transcript.jsonl"), transcript.as_bytes())?;

        for d in &s.drafts {
            write(&dir.join(format!("draft-{}.dsl", d.number)), d.code.as_bytes())?;
            let mut buf = Vec::new();
            write_trace(&d.trace, &mut buf).expect("writing to a Vec");
            write(&dir.join(format!("draft-{}.trace.jsonl", d.number)), &buf)?;
        }
        if let Some(f) = &s.final_answer {
            write(&dir.join("final.json"), serde_json::to_string_pretty(f).expect("final serializes").as_bytes())?;
        }
        write(&dir.join("session.json"), serde_json::to_string(s).expect("session serializes").as_bytes())
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.session_dir(id)?.join("session.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(source) => return Err(StoreError::Io { path: path.display().to_string(), source }),
        };
        let mut s: Session = serde_json::from_str(&text)
            .map_err(|source| StoreError::Json { path: path.display().to_string(), source })?;
        s.reparse();
        Ok(s)
    }

    /// Ids of every stored session, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => return Err(StoreError::Io { path: self.dir.display().to_string(), source }),
        };
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter(|e| e.path().join("session.json").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }
}
