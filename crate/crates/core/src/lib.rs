//! Grounded workflow generation over N-CEN fund reports.
//!
//! An LLM is lectured on a registry of domain APIs, writes workflow code in a
//! small closed language, and the engine executes that code in a sandbox where
//! only the registered APIs and a fixed set of builtins are callable. The crate
//! also carries the question-answering benchmark used to evaluate the loop:
//! a fixture N-CEN corpus, a three-tier dataset builder, a context-retrieval
//! baseline and the scoring harness.

pub mod baseline;
pub mod corpus;
pub mod dataset;
pub mod evaluator;
pub mod fixtures;
pub mod lecture;
pub mod llm;
pub mod ncen_api;
pub mod orchestrator;
pub mod workflow;

pub use corpus::{Corpus, CorpusIndex, FilingRef, RawReport};
pub use dataset::{Answer, QaItem, Tier};
pub use evaluator::{BenchResult, Verdict};
pub use lecture::{ApiDescriptor, LectureConfig, LecturePrompt, LectureVariant};
pub use llm::{ChatBackend, ChatMessage, ChatParams, EmbeddingVector, Role};
pub use ncen_api::{EntityRecord, FundBlock, MatchScore, NcenApi, Report};
pub use orchestrator::{FinalAnswer, Session, SessionState, WorkflowDraft};
pub use workflow::{ExecLimits, ExecResult, Value, WorkflowProgram};
