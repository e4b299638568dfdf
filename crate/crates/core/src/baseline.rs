//! The context-retrieval comparator: embed every fund block, pick the top-k
//! blocks for a question by cosine similarity and prompt the model with
//! those blocks prepended to the question.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::QaItem;
use crate::evaluator::{default_k, Method, MethodOutput};
use crate::llm::tokens::PROMPT_TOKEN_LIMIT;
use crate::llm::{cosine, ChatMessage, Embedder, EmbeddingVector, Gateway, LlmError, TokenCounter};
use crate::ncen_api::{FundBlock, NcenApi};

pub const BASELINE_INSTRUCTION: &str =
    "Answer the question using only the fund report excerpts below. Reply with the answer alone.";

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("embedding failed for {} block(s): {}", failed.len(), failed.join(", "))]
    PartialBuild { failed: Vec<String> },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("question needs {tokens} tokens but only {budget} are available")]
    QuestionTooLong { tokens: usize, budget: usize },
    #[error("index embeds with dimension {index} but the embedder produces {embedder}")]
    Dimension { index: usize, embedder: usize },
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("block {0} is not in the corpus")]
    MissingBlock(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub block_id: String,
    pub fund_name: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingIndex {
    pub dimension: usize,
    pub entries: Vec<IndexEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dimension: usize,
    count: usize,
}

impl EmbeddingIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A header line `{dimension, count}` followed by one JSON entry per line.
    pub fn write_to(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        let header = Header { dimension: self.dimension, count: self.entries.len() };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for e in &self.entries {
            writeln!(w, "{}", serde_json::to_string(e)?)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl std::io::Read) -> Result<Self, BaselineError> {
        let fmt = |line: usize, message: String| BaselineError::Format { line, message };
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or_else(|| fmt(1, "missing header".into()))??;
        let header: Header = serde_json::from_str(&first).map_err(|e| fmt(1, e.to_string()))?;
        let mut entries = Vec::with_capacity(header.count);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: IndexEntry = serde_json::from_str(&line).map_err(|e| fmt(i + 2, e.to_string()))?;
            if e.vector.dimension() != header.dimension {
                return Err(fmt(i + 2, format!("vector has dimension {}", e.vector.dimension())));
            }
            entries.push(e);
        }
        if entries.len() != header.count {
            return Err(fmt(1, format!("header says {} entries, found {}", header.count, entries.len())));
        }
        Ok(Self { dimension: header.dimension, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Embeds every block. Failures are collected and reported together.
pub fn build_index(blocks: &[FundBlock], embedder: &Embedder) -> Result<EmbeddingIndex, BaselineError> {
    let results: Vec<_> = blocks.par_iter().map(|b| (b, embedder.embed(&b.text))).collect();
    let mut entries = Vec::with_capacity(blocks.len());
    let mut failed = Vec::new();
    for (b, r) in results {
        match r {
            Ok(vector) => entries.push(IndexEntry { block_id: b.block_id(), fund_name: b.fund_name.clone(), vector }),
            Err(e) => failed.push(format!("{} ({e})", b.block_id())),
        }
    }
    if !failed.is_empty() {
        return Err(BaselineError::PartialBuild { failed });
    }
    entries.sort_by(|a, b| a.block_id.cmp(&b.block_id));
    Ok(EmbeddingIndex { dimension: embedder.dimension(), entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub block_id: String,
    pub fund_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub hits: Vec<Hit>,
    /// `k` was larger than the index, so every entry was returned.
    pub exhausted: bool,
}

/// Exhaustive scan: descending cosine, ties by ascending block id.
pub fn retrieve(
    index: &EmbeddingIndex,
    embedder: &Embedder,
    question: &str,
    k: usize,
) -> Result<Retrieval, BaselineError> {
    if k == 0 {
        return Err(BaselineError::ZeroK);
    }
    if !index.is_empty() && embedder.dimension() != index.dimension {
        return Err(BaselineError::Dimension { index: index.dimension, embedder: embedder.dimension() });
    }
    let q = embedder.embed(question)?;
    let mut hits = index
        .entries
        .iter()
        .map(|e| {
            // A zero vector matches nothing.
            let score = match cosine(&q, &e.vector) {
                Ok(s) => s,
                Err(LlmError::ZeroVector) => -1.0,
                Err(other) => return Err(other),
            };
            Ok(Hit { block_id: e.block_id.clone(), fund_name: e.fund_name.clone(), score })
        })
        .collect::<Result<Vec<_>, LlmError>>()?;
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.block_id.cmp(&b.block_id)));
    let exhausted = k > hits.len();
    hits.truncate(k);
    Ok(Retrieval { hits, exhausted })
}

/// The prompt actually sent, with the bookkeeping the tests look at.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePrompt {
    pub text: String,
    /// How many bytes of each block made it in, in rank order.
    pub kept: Vec<usize>,
    pub truncated: bool,
}

fn frame(context: &str, question: &str) -> String {
    let mut s = String::new();
    let _ = write!(s, "{BASELINE_INSTRUCTION}\n\nContext:\n{context}\n\nQuestion: {question}");
    s
}

/// Packs block prefixes in rank order until the token budget is spent. The
/// question is never cut.
pub fn build_prompt(
    question: &str,
    blocks: &[FundBlock],
    counter: &dyn TokenCounter,
    budget: usize,
) -> Result<BaselinePrompt, BaselineError> {
    let fixed = counter.count(&frame("", question));
    if fixed > budget {
        return Err(BaselineError::QuestionTooLong { tokens: fixed, budget });
    }
    // Separator between blocks counts against the budget too.
    let sep = "\n\n";
    let mut left = budget - fixed;
    let mut parts: Vec<&str> = Vec::new();
    let mut kept = Vec::new();
    let mut truncated = false;
    for b in blocks {
        let overhead = if parts.is_empty() { 0 } else { counter.count(sep) };
        if left <= overhead {
            truncated = true;
            kept.push(0);
            continue;
        }
        let room = left - overhead;
        let piece = counter.truncate(&b.text, room);
        if piece.len() < b.text.len() {
            truncated = true;
        }
        if piece.is_empty() {
            kept.push(0);
            continue;
        }
        left -= overhead + counter.count(piece);
        kept.push(piece.len());
        parts.push(piece);
    }
    let text = frame(&parts.join(sep), question);
    debug_assert!(counter.count(&text) <= budget);
    Ok(BaselinePrompt { text, kept, truncated })
}

/// Index, embedder and chat gateway bundled for answering questions.
pub struct Baseline {
    index: EmbeddingIndex,
    embedder: Embedder,
    gateway: Gateway,
    blocks: HashMap<String, FundBlock>,
    prompt_budget: usize,
}

impl Baseline {
    pub fn new(api: &NcenApi, index: EmbeddingIndex, embedder: Embedder, gateway: Gateway) -> Self {
        let blocks = api.all_blocks().into_iter().map(|b| (b.block_id(), b)).collect();
        Self { index, embedder, gateway, blocks, prompt_budget: PROMPT_TOKEN_LIMIT }
    }

    pub fn index(&self) -> &EmbeddingIndex {
        &self.index
    }

    pub fn retrieve(&self, question: &str, k: usize) -> Result<Vec<FundBlock>, BaselineError> {
        retrieve(&self.index, &self.embedder, question, k)?
            .hits
            .into_iter()
            .map(|h| self.blocks.get(&h.block_id).cloned().ok_or(BaselineError::MissingBlock(h.block_id)))
            .collect()
    }

    pub fn prompt(&self, question: &str, blocks: &[FundBlock]) -> Result<BaselinePrompt, BaselineError> {
        build_prompt(question, blocks, self.embedder.counter().as_ref(), self.prompt_budget)
    }

    /// Retrieves, builds the prompt and returns the raw completion.
    pub fn answer(&self, question: &str, k: usize) -> Result<String, BaselineError> {
        let blocks = self.retrieve(question, k)?;
        let prompt = self.prompt(question, &blocks)?;
        Ok(self.gateway.chat(&[ChatMessage::user(prompt.text)])?)
    }
}

pub struct BaselineMethod {
    name: String,
    baseline: Arc<Baseline>,
}

impl BaselineMethod {
    pub fn new(name: impl Into<String>, baseline: Arc<Baseline>) -> Self {
        Self { name: name.into(), baseline }
    }
}

impl Method for BaselineMethod {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(&self, item: &QaItem) -> Result<MethodOutput, String> {
        self.baseline.answer(&item.question, default_k(item.tier)).map(MethodOutput::text).map_err(|e| e.to_string())
    }
}
