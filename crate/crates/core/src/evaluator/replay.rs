use std::sync::Arc;

use super::simulated::fence;
use crate::dataset::{golden_summary, golden_workflow, Answer, DatasetError, QaItem, Tier};
use crate::lecture::{ApiDescriptor, LectureConfig};
use crate::llm::{ChatMessage, ChatParams, FnBackend, Gateway, LlmError, Role, ScriptedBackend};
use crate::ncen_api::NcenApi;
use crate::orchestrator::{Orchestrator, OrchestratorError, SUMMARY_PROMPT};

/// Replay answering every item's question with its golden workflow, keyed
/// by the two-message history `[lecture, question]`, and the summary request
/// that follows with the golden summary.
pub fn golden_replay(items: &[QaItem], lecture_text: &str) -> Result<ScriptedBackend, DatasetError> {
    let mut s = ScriptedBackend::strict();
    for item in items {
        let history = [ChatMessage::system(lecture_text), ChatMessage::user(item.question.clone())];
        let code = fence(&golden_workflow(item)?);
        s.insert(&history, code.clone());
        let [system, question] = history;
        let asked = [system, question, ChatMessage::assistant(code), ChatMessage::user(SUMMARY_PROMPT)];
        s.insert(&asked, golden_summary(item)?);
    }
    Ok(s)
}

/// A two-draft conversation in which user feedback fixes a misreading of
/// the question.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackScenario {
    pub name: &'static str,
    pub item: QaItem,
    pub first_draft: String,
    pub summary: String,
    pub feedback: String,
    pub revised_summary: String,
    pub corrected_draft: String,
}

fn scenario_item(id: &str, fund: &str, value: f64, precision: u32) -> QaItem {
    QaItem {
        id: id.into(),
        tier: Tier::Easy,
        question: format!("What is the total purchase sale of {fund}?"),
        answer: Answer::Number { value, precision },
        relations: vec!["total purchase sale".into()],
        source_funds: vec![fund.into()],
        items_cited: vec!["C.17".into()],
        seed: 0,
    }
}

/// "February" read as a reporting month instead of part of the fund name.
pub fn february_scenario() -> FeedbackScenario {
    let fund = "INNOVATOR U.S. EQUITY POWER BUFFER ETF - FEBRUARY";
    let item = scenario_item("replay-february", fund, 9_120_455.18, 2);
    FeedbackScenario {
        name: "february",
        corrected_draft: golden_workflow(&item).expect("easy value item"),
        item,
        first_draft: "# February is the reporting month; look the fund up by its name\n\
report = get_report(\"INNOVATOR U.S. EQUITY POWER BUFFER ETF\")\n\
block = fetch_block(report, \"INNOVATOR U.S. EQUITY POWER BUFFER ETF\")\n\
answer = extract_value(block, \"total purchase sale\")\n"
            .into(),
        summary: "The code takes February as the month of the filing, looks up the report for the Innovator U.S. \
Equity Power Buffer ETF, fetches that fund's block and extracts its total purchase sale."
            .into(),
        feedback: "February is part of the fund name, not a time reference. The fund is called \
INNOVATOR U.S. EQUITY POWER BUFFER ETF - FEBRUARY."
            .into(),
        revised_summary: "The code looks up the report for the fund named Innovator U.S. Equity Power Buffer ETF - \
February, fetches that fund's block and extracts its total purchase sale."
            .into(),
    }
}

/// "Purchase sale" split into two items that get added up.
pub fn purchase_sale_scenario() -> FeedbackScenario {
    let fund = "WCM SMALL CAP GROWTH FUND";
    let item = scenario_item("replay-purchase-sale", fund, 31_442_870.05, 2);
    FeedbackScenario {
        name: "purchase-sale",
        corrected_draft: golden_workflow(&item).expect("easy value item"),
        item,
        first_draft: "report = get_report(\"WCM SMALL CAP GROWTH FUND\")\n\
block = fetch_block(report, \"WCM SMALL CAP GROWTH FUND\")\n\
purchases = extract_value(block, \"total purchase\")\n\
sales = extract_value(block, \"total sale\")\n\
answer = purchases + sales\n"
            .into(),
        summary: "The code fetches the block of WCM Small Cap Growth Fund, extracts the total purchases and the \
total sales as two separate values and adds them."
            .into(),
        feedback: "Purchase sale is a single term. Extract the one value labeled total purchase sale instead of \
adding two values."
            .into(),
        revised_summary: "The code fetches the block of WCM Small Cap Growth Fund and extracts the single value \
labeled total purchase sale."
            .into(),
    }
}

pub fn feedback_scenarios() -> Vec<FeedbackScenario> {
    vec![february_scenario(), purchase_sale_scenario()]
}

impl FeedbackScenario {
    /// Runs the conversation against a backend that plays the model's part
    /// and returns the recorded replay.
    pub fn record(
        &self,
        api: Arc<NcenApi>,
        registry: Vec<ApiDescriptor>,
        lecture: &LectureConfig,
    ) -> Result<ScriptedBackend, OrchestratorError> {
        let me = self.clone();
        let backend = FnBackend(move |h: &[ChatMessage]| {
            let last = h.last().filter(|m| m.role == Role::User).map(|m| m.content.as_str());
            match last {
                Some(SUMMARY_PROMPT) if h.iter().any(|m| m.content == me.feedback) => Ok(me.revised_summary.clone()),
                Some(SUMMARY_PROMPT) => Ok(me.summary.clone()),
                Some(t) if t == me.feedback => Ok(fence(&me.corrected_draft)),
                Some(t) if t == me.item.question => Ok(fence(&me.first_draft)),
                _ => Err(LlmError::Precondition("unexpected turn".into())),
            }
        });
        let o = Orchestrator::new(Gateway::new(Arc::new(backend), ChatParams::default()), api, registry);
        let mut s = o.start_session(lecture)?;
        o.ask(&mut s, &self.item.question)?;
        o.summarize(&mut s)?;
        o.feedback(&mut s, &self.feedback)?;
        o.summarize(&mut s)?;
        Ok(ScriptedBackend::from_transcript(&s.transcript))
    }
}
