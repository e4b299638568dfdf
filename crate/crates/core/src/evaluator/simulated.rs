use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use sha2::{Digest, Sha256};

use crate::dataset::{golden_workflow, DatasetError, QaItem};
use crate::lecture::LectureFeatures;
use crate::llm::{history_hash, ChatBackend, ChatMessage, ChatParams, LlmError, Role};
use crate::orchestrator::SUMMARY_PROMPT;

/// Share of questions that go wrong when one lecture component is missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultRates {
    /// Context sentence removed: the value or entity label is misread.
    pub no_context: f64,
    /// Opaque argument names: the two arguments of a call are swapped.
    pub opaque_args: f64,
    /// No request for code: the reply is prose.
    pub no_code_prompt: f64,
}

impl Default for FaultRates {
    fn default() -> Self {
        Self { no_context: 0.12, opaque_args: 0.45, no_code_prompt: 0.97 }
    }
}

pub const PROSE_REPLY: &str = "I am ready. Based on what I know, the information you are asking about is reported \
in the fund's most recent N-CEN filing, but I cannot look it up directly.";

pub const CANNED_SUMMARY: &str = "The workflow finds the report that contains each fund named in the question, \
fetches the fund's block from it, extracts the requested entity or value, and combines the results into the answer.";

/// Deterministic stand-in for a code-writing model. It knows the golden
/// workflow of every question and degrades its replies according to which
/// lecture components are missing from the system message.
pub struct FaultInjectingBackend {
    golden: HashMap<String, String>,
    rates: FaultRates,
}

static TWO_ARG_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(fetch_block|extract_entity|extract_value)\(([^,()]+), ([^()]+?)\)").unwrap());
static LABELLED_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\b(extract_entity|extract_value)\(([^,()]+), "[^"]*"\)"#).unwrap());

/// Stable pseudo-random draw in [0, 1) for a question under a salt.
pub fn draw(salt: &str, question: &str) -> f64 {
    let h = Sha256::digest(format!("{salt}\0{question}").as_bytes());
    let n = u64::from_be_bytes(h[..8].try_into().unwrap());
    (n >> 11) as f64 / (1u64 << 53) as f64
}

pub fn swap_first_call_args(code: &str) -> String {
    TWO_ARG_CALL.replace(code, "$1($3, $2)").into_owned()
}

pub fn misread_first_label(code: &str) -> String {
    LABELLED_CALL
        .replace(code, |c: &regex::Captures| {
            let generic = if &c[1] == "extract_entity" { "company" } else { "amount" };
            format!("{}({}, \"{generic}\")", &c[1], &c[2])
        })
        .into_owned()
}

pub fn fence(code: &str) -> String {
    format!("```\n{}\n```", code.trim_end())
}

impl FaultInjectingBackend {
    pub fn new(items: &[QaItem], rates: FaultRates) -> Result<Self, DatasetError> {
        let golden =
            items.iter().map(|i| Ok((i.question.clone(), golden_workflow(i)?))).collect::<Result<_, DatasetError>>()?;
        Ok(Self { golden, rates })
    }
}

impl ChatBackend for FaultInjectingBackend {
    fn chat(&self, history: &[ChatMessage], _: &ChatParams) -> Result<String, LlmError> {
        let lecture = history
            .iter()
            .find(|m| m.role == Role::System)
            .ok_or_else(|| LlmError::Precondition("no lecture in history".into()))?;
        let question = history
            .iter()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| LlmError::Precondition("no question in history".into()))?;
        if history.last().is_some_and(|m| m.role == Role::User && m.content == SUMMARY_PROMPT) {
            return Ok(CANNED_SUMMARY.to_string());
        }
        let code =
            self.golden.get(&question.content).ok_or_else(|| LlmError::Unmatched { hash: history_hash(history) })?;

        // The same question always fails the same way, including on the
        // repair turn.
        let f = LectureFeatures::detect(&lecture.content);
        let q = question.content.as_str();
        if !f.asks_for_code && draw("no-code-prompt", q) < self.rates.no_code_prompt {
            return Ok(PROSE_REPLY.to_string());
        }
        let mut code = code.clone();
        if !f.meaningful_args && draw("opaque-args", q) < self.rates.opaque_args {
            code = swap_first_call_args(&code);
        }
        if !f.has_context && draw("no-context", q) < self.rates.no_context {
            code = misread_first_label(&code);
        }
        Ok(fence(&code))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rewrites() {
        let code = "b = fetch_block(report, \"F\")\nv = extract_value(b, \"gross commission\")\nw = extract_value(b, \"fund net assets\")";
        assert_eq!(
            swap_first_call_args(code),
            "b = fetch_block(\"F\", report)\nv = extract_value(b, \"gross commission\")\nw = extract_value(b, \"fund net assets\")"
        );
        assert_eq!(
            misread_first_label(code),
            "b = fetch_block(report, \"F\")\nv = extract_value(b, \"amount\")\nw = extract_value(b, \"fund net assets\")"
        );
    }

    #[test]
    fn draws_are_uniform_enough() {
        let n = 4000;
        let hits = (0..n).filter(|i| draw("s", &format!("q{i}")) < 0.25).count();
        assert!((900..1100).contains(&hits), "{hits}");
        assert_eq!(draw("a", "q"), draw("a", "q"));
        assert_ne!(draw("a", "q"), draw("b", "q"));
    }
}
