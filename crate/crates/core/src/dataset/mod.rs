//! The three-tier N-CEN question-answering dataset: data model, builders,
//! golden workflows and JSONL persistence.

mod build;
mod golden;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{
    build_all, build_easy, build_hard, build_intermediate, fund_records, ratio_precision, template_items, FundRecord,
    ENTITY_RELATIONS, MAX_INVERSE_ANSWERS,
};
pub use golden::{golden_summary, golden_workflow, QuestionFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tier {
    Easy,
    Intermediate,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Intermediate, Tier::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Easy => "EASY",
            Tier::Intermediate => "INTERMEDIATE",
            Tier::Hard => "HARD",
        }
    }

    fn id_prefix(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Intermediate => "intermediate",
            Tier::Hard => "hard",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tier {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EASY" => Ok(Tier::Easy),
            "INTERMEDIATE" => Ok(Tier::Intermediate),
            "HARD" => Ok(Tier::Hard),
            other => Err(DatasetError::Schema { line: 0, message: format!("unknown tier {other:?}") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Answer {
    Entities { entities: Vec<String> },
    Number { value: f64, precision: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub tier: Tier,
    pub question: String,
    pub answer: Answer,
    pub relations: Vec<String>,
    pub source_funds: Vec<String>,
    pub items_cited: Vec<String>,
    pub seed: u64,
}

impl QaItem {
    pub fn check(&self) -> Result<(), String> {
        if self.source_funds.is_empty() {
            return Err("source_funds is empty".into());
        }
        if let Answer::Entities { entities } = &self.answer {
            if entities.is_empty() {
                return Err("entity answer is empty".into());
            }
            let mut sorted = entities.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != entities.len() {
                return Err("entity answer has duplicates".into());
            }
        }
        if let Answer::Number { value, .. } = &self.answer {
            if !value.is_finite() {
                return Err("numeric answer is not finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{tier}: asked for {requested} items but only {available} can be built (short by {})", requested - available)]
    Shortfall { tier: Tier, requested: usize, available: usize },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("item {id}: {message}")]
    Golden { id: String, message: String },
}

pub fn to_jsonl(items: &[QaItem]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("items serialize") + "\n").collect()
}

/// Parses JSONL; blank lines are skipped and errors name the 1-based line.
pub fn from_jsonl(text: &str) -> Result<Vec<QaItem>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: QaItem =
            serde_json::from_str(line).map_err(|e| DatasetError::Schema { line: i + 1, message: e.to_string() })?;
        item.check().map_err(|message| DatasetError::Schema { line: i + 1, message })?;
        out.push(item);
    }
    Ok(out)
}

pub fn save(items: &[QaItem], path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.display().to_string(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, to_jsonl(items)).map_err(io)
}

pub fn load(path: &Path) -> Result<Vec<QaItem>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    from_jsonl(&text)
}
