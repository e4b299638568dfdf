//! The bundled offline corpus: nine synthetic N-CEN filings (one of them
//! superseded by a later filing of the same trust) covering twenty funds.

use std::path::PathBuf;

use crate::corpus::{parse_header, Corpus, FilingRef, RawReport};
use crate::dataset::{self, QaItem};

macro_rules! bundled {
    ($($acc:literal),* $(,)?) => {
        &[$(($acc, include_str!(concat!("../fixtures/ncen/", $acc, ".txt")))),*]
    };
}

const REPORTS: &[(&str, &str)] = bundled![
    "0000754811-23-000019",
    "0001039803-23-000031",
    "0001104659-23-031187",
    "0001193125-21-081122",
    "0001193125-23-074410",
    "0001193125-23-082215",
    "0001398344-23-004471",
    "0001580642-23-001822",
    "0001623632-23-000211",
];

pub const FORM_INDEX: &str = include_str!("../fixtures/ncen/form.idx");

/// Seed and per-tier size of the checked-in question set.
pub const DATASET_SEED: u64 = 20_230_301;
pub const DATASET_PER_TIER: usize = 32;

const DATASET: &str = include_str!("../fixtures/dataset/ncen_qa.jsonl");

/// Directory holding the fixture filings in the source tree.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/ncen")
}

pub fn dataset_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/dataset/ncen_qa.jsonl")
}

/// Recorded model conversations: `golden.jsonl` plus one file per feedback
/// scenario.
pub fn replay_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay")
}

/// The checked-in question set.
pub fn bundled_dataset() -> Vec<QaItem> {
    dataset::from_jsonl(DATASET).expect("bundled dataset parses")
}

/// All nine raw filings, including the superseded one.
pub fn bundled_raw_reports() -> Vec<RawReport> {
    REPORTS
        .iter()
        .map(|(acc, body)| {
            let (header_acc, filed) = parse_header(body).expect("fixture header");
            assert_eq!(&header_acc, acc);
            RawReport { filing: FilingRef::new(*acc, filed, format!("{acc}.txt")), body: (*body).to_string() }
        })
        .collect()
}

/// The deduplicated fixture corpus: eight filings, twenty funds.
pub fn bundled_corpus() -> Corpus {
    Corpus::from_raw(bundled_raw_reports()).expect("fixture corpus is consistent")
}
