//! Replay backend: replies are looked up by the hash of the whole history.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{history_hash, ChatBackend, ChatMessage, ChatParams, LlmError, Role};

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt_hash: String,
    /// The last message of the history, for human review only.
    pub prompt_text: String,
    pub reply: String,
}

#[derive(Debug, Default)]
pub struct ScriptedBackend {
    entries: Vec<ReplayEntry>,
    by_hash: HashMap<String, usize>,
    /// In lenient mode unknown prompts get this reply instead of an error.
    fallback: Option<String>,
    calls: AtomicUsize,
}

impl Clone for ScriptedBackend {
    fn clone(&self) -> Self {
        Self {
            entries: self.entries.clone(),
            by_hash: self.by_hash.clone(),
            fallback: self.fallback.clone(),
            calls: AtomicUsize::new(self.calls()),
        }
    }
}

impl ScriptedBackend {
    pub fn strict() -> Self {
        Self::default()
    }

    pub fn lenient(fallback: impl Into<String>) -> Self {
        Self { fallback: Some(fallback.into()), ..Self::default() }
    }

    pub fn set_fallback(&mut self, fallback: Option<String>) {
        self.fallback = fallback;
    }

    pub fn insert(&mut self, history: &[ChatMessage], reply: impl Into<String>) {
        let entry = ReplayEntry {
            prompt_hash: history_hash(history),
            prompt_text: history.last().map(|m| m.content.clone()).unwrap_or_default(),
            reply: reply.into(),
        };
        self.push(entry);
    }

    pub fn push(&mut self, entry: ReplayEntry) {
        match self.by_hash.get(&entry.prompt_hash) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.by_hash.insert(entry.prompt_hash.clone(), self.entries.len());
                self.entries.push(entry);
            }
        }
    }

    pub fn extend(&mut self, other: &ScriptedBackend) {
        for e in &other.entries {
            self.push(e.clone());
        }
    }

    /// Every assistant turn keyed by the messages preceding it.
    pub fn from_transcript(messages: &[ChatMessage]) -> Self {
        let mut s = Self::strict();
        for (i, m) in messages.iter().enumerate() {
            if m.role == Role::Assistant {
                s.insert(&messages[..i], m.content.clone());
            }
        }
        s
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of `chat` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut s = Self::strict();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: ReplayEntry = serde_json::from_str(line).map_err(|err| format!("replay line {}: {err}", i + 1))?;
            s.push(e);
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_jsonl())
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, history: &[ChatMessage], _params: &ChatParams) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let hash = history_hash(history);
        match (self.by_hash.get(&hash), &self.fallback) {
            (Some(&i), _) => Ok(self.entries[i].reply.clone()),
            (None, Some(fb)) => Ok(fb.clone()),
            (None, None) => Err(LlmError::Unmatched { hash }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_by_history() {
        let h = [ChatMessage::system("L"), ChatMessage::user("Q")];
        let mut s = ScriptedBackend::strict();
        s.insert(&h, "A");
        let p = ChatParams::default();
        assert_eq!(s.chat(&h, &p).unwrap(), "A");
        assert_eq!(s.chat(&h, &p).unwrap(), "A");
        let other = [ChatMessage::system("L"), ChatMessage::user("other")];
        match s.chat(&other, &p) {
            Err(LlmError::Unmatched { hash }) => assert_eq!(hash, history_hash(&other)),
            r => panic!("{r:?}"),
        }
        assert_eq!(s.calls(), 3);
        assert_eq!(ScriptedBackend::lenient("ok").chat(&other, &p).unwrap(), "ok");
    }

    #[test]
    fn jsonl_round_trip_and_line_errors() {
        let mut s = ScriptedBackend::strict();
        s.insert(&[ChatMessage::user("a")], "1");
        s.insert(&[ChatMessage::user("b")], "2");
        let back = ScriptedBackend::from_jsonl(&s.to_jsonl()).unwrap();
        assert_eq!(back.entries(), s.entries());
        let err = ScriptedBackend::from_jsonl("{}\n").unwrap_err();
        assert!(err.starts_with("replay line 1"));
    }

    #[test]
    fn transcript_replay_covers_assistant_turns() {
        let t = vec![
            ChatMessage::system("L"),
            ChatMessage::user("Q"),
            ChatMessage::assistant("code"),
            ChatMessage::user("feedback"),
            ChatMessage::assistant("code2"),
        ];
        let s = ScriptedBackend::from_transcript(&t);
        assert_eq!(s.len(), 2);
        assert_eq!(
            s.chat(&t[..3].iter().cloned().chain([t[3].clone()]).collect::<Vec<_>>(), &ChatParams::default()).unwrap(),
            "code2"
        );
    }
}
