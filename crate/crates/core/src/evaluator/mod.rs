//! Scoring: answer matching, benchmark runs and the comparison table, plus
//! the deterministic model stand-ins used to exercise the harness offline.

mod bench;
mod methods;
mod metrics;
mod replay;
mod simulated;

pub use bench::{
    render_table, run_bench, run_tiers, BenchResult, EvalError, FnMethod, ItemOutcome, Method, MethodOutput,
};
pub use methods::{default_k, WorkflowMethod};
pub use metrics::{match_entities, match_number, numeric_tokens, score, Verdict};
pub use replay::{february_scenario, feedback_scenarios, golden_replay, purchase_sale_scenario, FeedbackScenario};
pub use simulated::{
    draw, fence, misread_first_label, swap_first_call_args, FaultInjectingBackend, FaultRates, CANNED_SUMMARY,
    PROSE_REPLY,
};
