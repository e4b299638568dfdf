//! The six grounded N-CEN APIs: retrieval (`get_report`, `get_all_reports`,
//! `fetch_block`), partition (`segment_report`) and extraction
//! (`extract_entity`, `extract_value`).
//!
//! Everything here is read-only once the corpus is loaded. Segmentation for
//! every report is computed once at construction and shared afterwards.

pub mod parse;
pub mod similarity;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, FilingRef};
pub use similarity::{similarity, MatchScore, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub filing: FilingRef,
    pub body: String,
    pub fund_names: Vec<String>,
}

impl Report {
    pub fn new(filing: FilingRef, body: String) -> Self {
        let fund_names = parse::segment_body(&body).into_iter().map(|s| s.fund_name).collect();
        Self { filing, body, fund_names }
    }

    pub fn accession_number(&self) -> &str {
        &self.filing.accession_number
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundBlock {
    pub fund_name: String,
    pub text: String,
    pub source: FilingRef,
    /// Byte offset of `text` inside the parent body.
    pub offset: usize,
    /// Position of the block inside its report.
    pub ordinal: usize,
}

impl FundBlock {
    /// Stable identifier: `<accession>#<ordinal>`.
    pub fn block_id(&self) -> String {
        format!("{}#{:03}", self.source.accession_number, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub label: String,
    pub name: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApiError {
    #[error("no match for {query:?} (best candidates: {})", fmt_candidates(.candidates))]
    NoMatch { query: String, candidates: Vec<MatchScore> },
    #[error("value label {label:?} not found in block for {fund:?}")]
    NotFound { label: String, fund: String },
    #[error("cannot parse value {token:?} for label {label:?}")]
    Parse { label: String, token: String },
    #[error("report {0} is not part of the loaded corpus")]
    UnknownReport(String),
}

fn fmt_candidates(c: &[MatchScore]) -> String {
    if c.is_empty() {
        return "none".to_string();
    }
    c.iter().map(|m| format!("{} ({:.1})", m.candidate, m.score)).collect::<Vec<_>>().join(", ")
}

/// Segments a report into its fund blocks.
pub fn segment_report(report: &Report) -> Vec<FundBlock> {
    parse::segment_body(&report.body)
        .into_iter()
        .enumerate()
        .map(|(ordinal, seg)| FundBlock {
            fund_name: seg.fund_name,
            text: report.body[seg.start..seg.end].to_string(),
            source: report.filing.clone(),
            offset: seg.start,
            ordinal,
        })
        .collect()
}

/// Discovers every entity record in a block.
pub fn entities(block: &FundBlock) -> Vec<EntityRecord> {
    parse::parse_entities(&block.text)
}

/// Names of the records whose role best matches `entity_label`. An unmatched
/// label yields an empty list.
pub fn extract_entity(block: &FundBlock, entity_label: &str, threshold: f64) -> Vec<String> {
    let records = entities(block);
    let labels: Vec<&str> = records.iter().map(|r| r.label.as_str()).collect();
    match similarity::best_match(entity_label, labels, threshold) {
        Ok(best) => records.iter().filter(|r| r.label == best.candidate).map(|r| r.name.clone()).collect(),
        Err(_) => Vec::new(),
    }
}

/// First labeled value whose label best matches `value_label`.
pub fn extract_value(block: &FundBlock, value_label: &str, threshold: f64) -> Result<f64, ApiError> {
    let items = parse::parse_items(&block.text);
    let best = similarity::best_match(value_label, items.iter().map(|i| i.label.as_str()), threshold)
        .map_err(|_| ApiError::NotFound { label: value_label.to_string(), fund: block.fund_name.clone() })?;
    let item = items.iter().find(|i| i.label == best.candidate).expect("best match comes from items");
    parse::parse_number(&item.raw_value)
        .ok_or_else(|| ApiError::Parse { label: item.label.clone(), token: item.raw_value.clone() })
}

/// The API surface over a loaded corpus.
#[derive(Debug, Clone)]
pub struct NcenApi {
    corpus: Arc<Corpus>,
    blocks: Arc<HashMap<String, Arc<Vec<FundBlock>>>>,
    threshold: f64,
}

impl NcenApi {
    pub fn new(corpus: Arc<Corpus>) -> Self {
        Self::with_threshold(corpus, DEFAULT_THRESHOLD)
    }

    pub fn with_threshold(corpus: Arc<Corpus>, threshold: f64) -> Self {
        let blocks =
            corpus.reports().map(|r| (r.accession_number().to_string(), Arc::new(segment_report(r)))).collect();
        Self { corpus, blocks: Arc::new(blocks), threshold }
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Disambiguates a fund name to the report holding its latest filing.
    pub fn get_report(&self, fund_name: &str) -> Result<Arc<Report>, ApiError> {
        let index = self.corpus.index();
        let best = similarity::best_match(fund_name, index.entries.keys().map(String::as_str), self.threshold)
            .map_err(|candidates| ApiError::NoMatch { query: fund_name.to_string(), candidates })?;
        let filing = &index.entries[&best.candidate];
        self.corpus
            .report(&filing.accession_number)
            .ok_or_else(|| ApiError::UnknownReport(filing.accession_number.clone()))
    }

    /// Every report in the index, ascending by accession number.
    pub fn get_all_reports(&self) -> Vec<Arc<Report>> {
        self.corpus.reports_arc().collect()
    }

    pub fn segment_report(&self, report: &Report) -> Vec<FundBlock> {
        match self.blocks.get(report.accession_number()) {
            Some(cached) if self.corpus.report(report.accession_number()).as_deref() == Some(report) => {
                cached.as_ref().clone()
            }
            _ => segment_report(report),
        }
    }

    pub fn fetch_block(&self, report: &Report, fund_name: &str) -> Result<FundBlock, ApiError> {
        let blocks = self.segment_report(report);
        let best = similarity::best_match(fund_name, blocks.iter().map(|b| b.fund_name.as_str()), self.threshold)
            .map_err(|candidates| ApiError::NoMatch { query: fund_name.to_string(), candidates })?;
        Ok(blocks.into_iter().find(|b| b.fund_name == best.candidate).expect("best match comes from blocks"))
    }

    pub fn extract_entity(&self, block: &FundBlock, entity_label: &str) -> Vec<String> {
        extract_entity(block, entity_label, self.threshold)
    }

    pub fn extract_value(&self, block: &FundBlock, value_label: &str) -> Result<f64, ApiError> {
        extract_value(block, value_label, self.threshold)
    }

    /// Every fund block of every report, in report then filing order.
    pub fn all_blocks(&self) -> Vec<FundBlock> {
        self.get_all_reports().iter().flat_map(|r| self.segment_report(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn api() -> NcenApi {
        NcenApi::new(Arc::new(fixtures::bundled_corpus()))
    }

    fn block(api: &NcenApi, fund: &str) -> FundBlock {
        let report = api.get_report(fund).unwrap();
        api.fetch_block(&report, fund).unwrap()
    }

    #[test]
    fn get_report_exact_and_noisy() {
        let api = api();
        let exact = api.get_report("PRECIOUS METALS FUND").unwrap();
        let noisy = api.get_report("precious metals fund ").unwrap();
        assert_eq!(exact.accession_number(), "0000754811-23-000019");
        assert_eq!(exact, noisy);
    }

    #[test]
    fn get_report_miss_lists_candidates() {
        match api().get_report("ZZZ NONEXISTENT") {
            Err(ApiError::NoMatch { candidates, .. }) => assert_eq!(candidates.len(), 3),
            other => panic!("expected no-match, got {other:?}"),
        }
    }

    #[test]
    fn all_reports_sorted_and_stable() {
        let api = api();
        let first = api.get_all_reports();
        assert_eq!(first.len(), 8);
        let accs: Vec<_> = first.iter().map(|r| r.accession_number().to_string()).collect();
        let mut sorted = accs.clone();
        sorted.sort();
        assert_eq!(accs, sorted);
        assert_eq!(first, api.get_all_reports());
    }

    #[test]
    fn fetch_block_tolerates_typo_but_not_other_funds() {
        let api = api();
        let report = api.get_report("PROFUND VP INTERNET").unwrap();
        let b = api.fetch_block(&report, "PROFUND VP INTERNT").unwrap();
        assert_eq!(b.fund_name, "PROFUND VP INTERNET");
        assert!(similarity("PROFUND VP INTERNT", "PROFUND VP INTERNET").score >= DEFAULT_THRESHOLD);

        let foreign = "PRECIOUS METALS FUND";
        for name in &report.fund_names {
            assert!(similarity(foreign, name).score < DEFAULT_THRESHOLD);
        }
        assert!(matches!(api.fetch_block(&report, foreign), Err(ApiError::NoMatch { .. })));
    }

    #[test]
    fn blocks_are_ordered_non_overlapping_substrings() {
        let api = api();
        for report in api.get_all_reports() {
            let blocks = api.segment_report(&report);
            assert_eq!(blocks.len(), report.fund_names.len());
            for pair in blocks.windows(2) {
                assert_eq!(pair[0].offset + pair[0].text.len(), pair[1].offset);
            }
            for b in &blocks {
                assert_eq!(&report.body[b.offset..b.offset + b.text.len()], b.text);
                assert!(b.text.contains(&b.fund_name));
            }
        }
    }

    #[test]
    fn reference_entity_examples() {
        let api = api();
        assert_eq!(api.extract_entity(&block(&api, "COLUMBIA ACORN USA"), "custodian"), ["JPMORGAN CHASE BANK, N.A."]);
        assert_eq!(
            api.extract_entity(&block(&api, "PRECIOUS METALS FUND"), "custodian"),
            ["U.S. BANK NATIONAL ASSOCIATION"]
        );
        assert!(api.extract_entity(&block(&api, "PRECIOUS METALS FUND"), "nonexistent role").is_empty());
    }

    #[test]
    fn entity_cardinality_follows_records() {
        let api = api();
        // 0, 1, 2 and 3 records with the queried role
        let cases = [
            ("PRECIOUS METALS FUND", "collateral manager", 0),
            ("PRECIOUS METALS FUND", "pricing service", 1),
            ("COLUMBIA ACORN INTERNATIONAL", "pricing service", 2),
            ("GLOBAL RESOURCES FUND", "pricing service", 3),
            ("SIIT CORE FIXED INCOME FUND", "investment adviser", 3),
        ];
        for (fund, label, k) in cases {
            let b = block(&api, fund);
            let direct = entities(&b).iter().filter(|r| r.label == label).count();
            assert_eq!(direct, k, "{fund} {label}");
            assert_eq!(api.extract_entity(&b, label).len(), k, "{fund} {label}");
        }
    }

    #[test]
    fn reference_value_example_and_missing_item() {
        let api = api();
        assert_eq!(api.extract_value(&block(&api, "WCM SMALL CAP GROWTH FUND"), "gross commission"), Ok(20338.0));
        assert!(matches!(
            api.extract_value(&block(&api, "SIIT CORE FIXED INCOME FUND"), "gross commission"),
            Err(ApiError::NotFound { .. })
        ));
    }

    #[test]
    fn unparseable_value_names_token() {
        let filing = FilingRef::new("0000000000-00-000001", chrono::NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(), "x");
        let body = "Item C.1.a. Name of Fund: X FUND\nItem C.16.a. Gross commission: n/a\n".to_string();
        let report = Report::new(filing, body);
        let b = &segment_report(&report)[0];
        match extract_value(b, "gross commission", DEFAULT_THRESHOLD) {
            Err(ApiError::Parse { token, .. }) => assert_eq!(token, "n/a"),
            other => panic!("{other:?}"),
        }
    }
}
