use std::collections::HashMap;

use super::bench::{Method, MethodOutput};
use crate::dataset::{QaItem, Tier};
use crate::lecture::{LectureConfig, LectureVariant};
use crate::orchestrator::{Orchestrator, SessionState};

/// Answers through a full session: lecture, ask, optional scripted
/// feedback, approve.
pub struct WorkflowMethod {
    name: String,
    orchestrator: Orchestrator,
    lecture: LectureConfig,
    /// Feedback text by item id, sent once after the first draft.
    feedback: HashMap<String, String>,
}

impl WorkflowMethod {
    pub fn new(name: impl Into<String>, orchestrator: Orchestrator, variant: LectureVariant) -> Self {
        Self { name: name.into(), orchestrator, lecture: LectureConfig::new(variant), feedback: HashMap::new() }
    }

    pub fn with_lecture(mut self, lecture: LectureConfig) -> Self {
        self.lecture = lecture;
        self
    }

    pub fn with_feedback(mut self, feedback: HashMap<String, String>) -> Self {
        self.feedback = feedback;
        self
    }
}

impl Method for WorkflowMethod {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(&self, item: &QaItem) -> Result<MethodOutput, String> {
        let o = &self.orchestrator;
        let mut s = o.start_session(&self.lecture).map_err(|e| e.to_string())?;
        if s.state == SessionState::Failed {
            return Err(s.failure.unwrap_or_default());
        }
        o.ask(&mut s, &item.question).map_err(|e| e.to_string())?;
        let mut rounds = 0;
        if let Some(text) = self.feedback.get(&item.id) {
            if s.state == SessionState::AwaitingFeedback {
                o.summarize(&mut s).map_err(|e| e.to_string())?;
                o.feedback(&mut s, text).map_err(|e| e.to_string())?;
                rounds = 1;
            }
        }
        let repaired = s.drafts.iter().any(|d| d.repaired);
        if s.state == SessionState::Failed {
            return Err(s.failure.unwrap_or_default());
        }
        let fin = o.approve(&mut s).map_err(|e| e.to_string())?;
        Ok(MethodOutput { text: fin.answer_text, repaired, feedback_rounds: rounds })
    }
}

/// Retrieval depth per tier: one block for single-fund tiers, three for the
/// hard tier.
pub fn default_k(tier: Tier) -> usize {
    match tier {
        Tier::Hard => 3,
        _ => 1,
    }
}
