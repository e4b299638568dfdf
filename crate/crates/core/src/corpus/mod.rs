//! Report ingestion: discovery, rate-limited download, deduplication to the
//! latest filing per fund, and the on-disk store.

pub mod fetch;
pub mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ncen_api::{parse, Report};

pub use fetch::{
    download_all, download_report, fetch_filings, Clock, DateWindow, DirTransport, HttpResponse, HttpTransport,
    RateLimiter, SourceClient, SourceConfig, SystemClock, Transport,
};
pub use store::ReportStore;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("request to {url} failed after {attempts} attempt(s): {reason}")]
    Retryable { url: String, attempts: u32, reason: String },
    #[error("{url} returned HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("malformed index at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid index.json: {0}")]
    IndexJson(#[from] serde_json::Error),
}

impl CorpusError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Retryable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilingRef {
    pub accession_number: String,
    pub filing_date: NaiveDate,
    pub source_url: String,
}

impl FilingRef {
    pub fn new(accession_number: impl Into<String>, filing_date: NaiveDate, source_url: impl Into<String>) -> Self {
        Self { accession_number: accession_number.into(), filing_date, source_url: source_url.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawReport {
    pub filing: FilingRef,
    pub body: String,
}

/// Canonical key for a fund: upper-cased with whitespace runs collapsed.
pub fn canonical_fund_name(name: &str) -> String {
    name.split_whitespace().map(str::to_uppercase).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusIndex {
    pub entries: BTreeMap<String, FilingRef>,
    pub report_count: usize,
    pub fund_count: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexEntryJson {
    accession: String,
    filed: NaiveDate,
}

#[derive(Serialize, Deserialize)]
struct IndexJson {
    funds: BTreeMap<String, IndexEntryJson>,
    reports: usize,
}

impl CorpusIndex {
    fn from_entries(entries: BTreeMap<String, FilingRef>) -> Self {
        let report_count = entries.values().map(|f| f.accession_number.as_str()).collect::<BTreeSet<_>>().len();
        Self { fund_count: entries.len(), entries, report_count }
    }

    /// Distinct filings referenced by the index, ascending by accession number.
    pub fn filings(&self) -> Vec<FilingRef> {
        let mut by_acc: BTreeMap<&str, &FilingRef> = BTreeMap::new();
        for f in self.entries.values() {
            by_acc.entry(&f.accession_number).or_insert(f);
        }
        by_acc.into_values().cloned().collect()
    }

    pub fn to_json(&self) -> String {
        let doc = IndexJson {
            funds: self
                .entries
                .iter()
                .map(|(k, f)| {
                    (k.clone(), IndexEntryJson { accession: f.accession_number.clone(), filed: f.filing_date })
                })
                .collect(),
            reports: self.report_count,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("index serializes");
        s.push('\n');
        s
    }

    /// Reads `index.json`. Source URLs point at `<accession>.txt` under `dir`.
    pub fn from_json(text: &str, dir: &Path) -> Result<Self, CorpusError> {
        let doc: IndexJson = serde_json::from_str(text)?;
        let entries = doc
            .funds
            .into_iter()
            .map(|(name, e)| {
                let url = dir.join(format!("{}.txt", e.accession)).display().to_string();
                (name, FilingRef::new(e.accession, e.filed, url))
            })
            .collect();
        let index = Self::from_entries(entries);
        if index.report_count != doc.reports {
            return Err(CorpusError::Integrity(format!(
                "index.json declares {} reports but references {}",
                doc.reports, index.report_count
            )));
        }
        Ok(index)
    }
}

/// Maps every fund to its most recent filing. Equal dates fall back to the
/// lexicographically greatest accession number.
pub fn build_index(reports: &[RawReport]) -> Result<CorpusIndex, CorpusError> {
    let mut bodies: HashMap<&str, &str> = HashMap::new();
    for r in reports {
        if let Some(prev) = bodies.insert(&r.filing.accession_number, &r.body) {
            if prev != r.body {
                return Err(CorpusError::Integrity(format!(
                    "accession {} appears with two different bodies",
                    r.filing.accession_number
                )));
            }
        }
    }

    let mut entries: BTreeMap<String, FilingRef> = BTreeMap::new();
    for r in reports {
        for seg in parse::segment_body(&r.body) {
            let key = canonical_fund_name(&seg.fund_name);
            let newer = match entries.get(&key) {
                None => true,
                Some(cur) => {
                    (r.filing.filing_date, &r.filing.accession_number) > (cur.filing_date, &cur.accession_number)
                }
            };
            if newer {
                entries.insert(key, r.filing.clone());
            }
        }
    }
    Ok(CorpusIndex::from_entries(entries))
}

/// An index plus the reports it references.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    index: CorpusIndex,
    reports: BTreeMap<String, Arc<Report>>,
}

impl Corpus {
    /// Deduplicates `raws` and keeps only the filings the index still points at.
    pub fn from_raw(raws: Vec<RawReport>) -> Result<Self, CorpusError> {
        let index = build_index(&raws)?;
        let keep: BTreeSet<String> = index.entries.values().map(|f| f.accession_number.clone()).collect();
        let reports = raws
            .into_iter()
            .filter(|r| keep.contains(&r.filing.accession_number))
            .map(|r| {
                let acc = r.filing.accession_number.clone();
                (acc, Arc::new(Report::new(r.filing, r.body)))
            })
            .collect();
        Ok(Self { index, reports })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn report(&self, accession: &str) -> Option<Arc<Report>> {
        self.reports.get(accession).cloned()
    }

    /// Reports ascending by accession number.
    pub fn reports(&self) -> impl Iterator<Item = &Report> {
        self.reports.values().map(Arc::as_ref)
    }

    pub fn reports_arc(&self) -> impl Iterator<Item = Arc<Report>> + '_ {
        self.reports.values().cloned()
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    /// Loads a store directory written by [`Corpus::save`] or `ingest`.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        ReportStore::new(dir).load_corpus()
    }

    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        let store = ReportStore::new(dir);
        for r in self.reports.values() {
            store.put(&r.filing.accession_number, &r.body)?;
        }
        store.write_index(&self.index)
    }
}

/// Reads the `ACCESSION NUMBER` and `FILED AS OF DATE` header lines.
pub fn parse_header(body: &str) -> Option<(String, NaiveDate)> {
    let mut acc = None;
    let mut date = None;
    for line in body.lines().take(40) {
        if let Some(v) = line.strip_prefix("ACCESSION NUMBER:") {
            acc = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("FILED AS OF DATE:") {
            date = NaiveDate::parse_from_str(v.trim(), "%Y%m%d").ok();
        }
    }
    Some((acc?, date?))
}
