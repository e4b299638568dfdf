//! Fuzzy name matching used by every API that takes a free-text name.

use serde::{Deserialize, Serialize};

/// Default acceptance threshold on the 0..=100 similarity scale.
pub const DEFAULT_THRESHOLD: f64 = 85.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub candidate: String,
    pub score: f64,
}

/// Case-folds and collapses runs of whitespace.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ")
}

/// Normalized edit similarity: `100 * (1 - levenshtein / max_len)` over the
/// normalized forms, counted in chars. Two empty strings score 100.
pub fn similarity(a: &str, b: &str) -> MatchScore {
    let na = normalize(a);
    let nb = normalize(b);
    let max_len = na.chars().count().max(nb.chars().count());
    let score = if max_len == 0 {
        100.0
    } else {
        let dist = strsim::levenshtein(&na, &nb);
        100.0 * (1.0 - dist as f64 / max_len as f64)
    };
    MatchScore { candidate: b.to_string(), score }
}

/// Scores every candidate against `query`, best first. Equal scores are
/// ordered by the lexicographically smaller candidate.
pub fn rank<'a, I>(query: &str, candidates: I) -> Vec<MatchScore>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut scored: Vec<MatchScore> = candidates.into_iter().map(|c| similarity(query, c)).collect();
    scored.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.candidate.cmp(&y.candidate)));
    scored.dedup_by(|a, b| a.candidate == b.candidate);
    scored
}

/// Best candidate at or above `threshold`, or the top three as the error payload.
pub fn best_match<'a, I>(query: &str, candidates: I, threshold: f64) -> Result<MatchScore, Vec<MatchScore>>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut ranked = rank(query, candidates);
    match ranked.first() {
        Some(best) if best.score >= threshold => Ok(best.clone()),
        _ => {
            ranked.truncate(3);
            Err(ranked)
        }
    }
}
