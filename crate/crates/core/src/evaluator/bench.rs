use std::collections::BTreeSet;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{score, Verdict};
use crate::dataset::{QaItem, Tier};

/// What a method returns for one question.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MethodOutput {
    pub text: String,
    /// The automatic repair round was used.
    pub repaired: bool,
    pub feedback_rounds: usize,
}

impl MethodOutput {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), ..Self::default() }
    }
}

pub trait Method: Send + Sync {
    fn name(&self) -> &str;
    fn answer(&self, item: &QaItem) -> Result<MethodOutput, String>;
}

/// Adapts a closure into a [`Method`].
pub struct FnMethod<F> {
    name: String,
    f: F,
}

impl<F> FnMethod<F>
where
    F: Fn(&QaItem) -> Result<MethodOutput, String> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> Method for FnMethod<F>
where
    F: Fn(&QaItem) -> Result<MethodOutput, String> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(&self, item: &QaItem) -> Result<MethodOutput, String> {
        (self.f)(item)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub id: String,
    pub predicted: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub repaired: bool,
    #[serde(default)]
    pub feedback_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub method: String,
    pub tier: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub per_item: Vec<ItemOutcome>,
}

impl BenchResult {
    pub fn repaired(&self) -> usize {
        self.per_item.iter().filter(|o| o.repaired).count()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no items to score for {method} on {tier}")]
    NoItems { method: String, tier: String },
}

/// Scores `method` on the items of one tier (or all items). Method errors
/// count as incorrect and are recorded; they never abort the run. Items run
/// in parallel and outcomes are ordered by item id.
pub fn run_bench(method: &dyn Method, items: &[QaItem], tier: Option<Tier>) -> Result<BenchResult, EvalError> {
    let selected: Vec<&QaItem> = items.iter().filter(|i| tier.is_none_or(|t| i.tier == t)).collect();
    let tier_name = tier.map_or_else(|| "ALL".to_string(), |t| t.as_str().to_string());
    if selected.is_empty() {
        return Err(EvalError::NoItems { method: method.name().to_string(), tier: tier_name });
    }
    let mut per_item: Vec<ItemOutcome> = selected
        .par_iter()
        .map(|item| match method.answer(item) {
            Ok(out) => ItemOutcome {
                id: item.id.clone(),
                verdict: score(&item.answer, &out.text),
                predicted: out.text,
                error: None,
                repaired: out.repaired,
                feedback_rounds: out.feedback_rounds,
            },
            Err(e) => ItemOutcome {
                id: item.id.clone(),
                predicted: String::new(),
                verdict: Verdict::Incorrect,
                error: Some(e),
                repaired: false,
                feedback_rounds: 0,
            },
        })
        .collect();
    per_item.sort_by(|a, b| a.id.cmp(&b.id));
    let correct = per_item.iter().filter(|o| o.verdict.is_correct()).count();
    let total = per_item.len();
    Ok(BenchResult {
        method: method.name().to_string(),
        tier: tier_name,
        correct,
        total,
        accuracy: correct as f64 / total as f64,
        per_item,
    })
}

/// One result per tier that has items.
pub fn run_tiers(method: &dyn Method, items: &[QaItem]) -> Vec<BenchResult> {
    Tier::ALL.iter().filter_map(|t| run_bench(method, items, Some(*t)).ok()).collect()
}

fn tier_rank(t: &str) -> (usize, &str) {
    let pos = Tier::ALL.iter().position(|x| x.as_str() == t).unwrap_or(Tier::ALL.len());
    (pos, t)
}

/// Markdown table: one row per tier, one column per method, accuracy in
/// percent with one decimal.
pub fn render_table(results: &[BenchResult]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in results {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut tiers: Vec<&str> = results.iter().map(|r| r.tier.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    tiers.sort_by_key(|t| tier_rank(t));

    let mut out = String::from("| Tier |");
    for m in &methods {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(methods.len()));
    out.push('\n');
    for t in tiers {
        let _ = write!(out, "| {t} |");
        for m in &methods {
            match results.iter().find(|r| r.tier == t && r.method == *m) {
                Some(r) => {
                    let _ = write!(out, " {:.1}% |", r.accuracy * 100.0);
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Answer;

    fn items() -> Vec<QaItem> {
        let mk = |id: &str, tier, value: f64| QaItem {
            id: id.into(),
            tier,
            question: format!("q {id}"),
            answer: Answer::Number { value, precision: 2 },
            relations: vec!["gross commission".into()],
            source_funds: vec!["F".into()],
            items_cited: vec!["C.16".into()],
            seed: 1,
        };
        vec![mk("easy-002", Tier::Easy, 2.0), mk("easy-001", Tier::Easy, 1.0), mk("hard-001", Tier::Hard, 3.0)]
    }

    fn echo_first_char() -> impl Method {
        FnMethod::new("m", |i: &QaItem| {
            if i.id == "easy-002" {
                Err("boom".to_string())
            } else {
                Ok(MethodOutput::text(format!("answer: {}", &i.id[i.id.len() - 1..])))
            }
        })
    }

    #[test]
    fn errors_count_as_incorrect() {
        let r = run_bench(&echo_first_char(), &items(), Some(Tier::Easy)).unwrap();
        assert_eq!((r.correct, r.total), (1, 2));
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_item[0].id, "easy-001");
        assert_eq!(r.per_item[1].error.as_deref(), Some("boom"));
    }

    #[test]
    fn empty_answers_score_zero_and_empty_sets_are_errors() {
        let m = FnMethod::new("empty", |_: &QaItem| Ok(MethodOutput::text("")));
        assert_eq!(run_bench(&m, &items(), None).unwrap().accuracy, 0.0);
        assert!(matches!(run_bench(&m, &items(), Some(Tier::Intermediate)), Err(EvalError::NoItems { .. })));
        assert!(run_bench(&m, &[], None).is_err());
    }

    #[test]
    fn deterministic() {
        let m = echo_first_char();
        assert_eq!(run_bench(&m, &items(), None).unwrap(), run_bench(&m, &items(), None).unwrap());
    }

    #[test]
    fn table_layout() {
        assert_eq!(render_table(&[]), "| Tier |\n|---|\n");
        let one = run_bench(&echo_first_char(), &items(), Some(Tier::Hard)).unwrap();
        assert_eq!(render_table(std::slice::from_ref(&one)), "| Tier | m |\n|---|---:|\n| HARD | 0.0% |\n");
        let mut all = run_tiers(&echo_first_char(), &items());
        all.reverse();
        let table = render_table(&all);
        let rows: Vec<&str> = table.lines().skip(2).map(|l| l.split('|').nth(1).unwrap().trim()).collect();
        assert_eq!(rows, ["EASY", "HARD"]);
        assert!(table.contains("| EASY | 50.0% |"));
    }
}
