use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{Corpus, CorpusError, CorpusIndex};
use crate::ncen_api::Report;

pub const INDEX_FILE: &str = "index.json";

/// Filesystem store: one `<accession>.txt` per report plus `index.json`.
#[derive(Debug, Clone)]
pub struct ReportStore {
    dir: PathBuf,
}

impl ReportStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn report_path(&self, accession: &str) -> PathBuf {
        self.dir.join(format!("{accession}.txt"))
    }

    pub fn get(&self, accession: &str) -> Result<Option<String>, CorpusError> {
        let path = self.report_path(accession);
        match fs::read_to_string(&path) {
            Ok(body) => Ok(Some(body)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CorpusError::io(&path, e)),
        }
    }

    pub fn put(&self, accession: &str, body: &str) -> Result<(), CorpusError> {
        fs::create_dir_all(&self.dir).map_err(|e| CorpusError::io(&self.dir, e))?;
        let path = self.report_path(accession);
        // write then rename so concurrent readers never see a partial body
        let tmp = self.dir.join(format!(".{accession}.tmp"));
        fs::write(&tmp, body).map_err(|e| CorpusError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CorpusError::io(&path, e))
    }

    pub fn write_index(&self, index: &CorpusIndex) -> Result<(), CorpusError> {
        fs::create_dir_all(&self.dir).map_err(|e| CorpusError::io(&self.dir, e))?;
        let path = self.dir.join(INDEX_FILE);
        fs::write(&path, index.to_json()).map_err(|e| CorpusError::io(&path, e))
    }

    pub fn read_index(&self) -> Result<CorpusIndex, CorpusError> {
        let path = self.dir.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
        CorpusIndex::from_json(&text, &self.dir)
    }

    pub fn load_corpus(&self) -> Result<Corpus, CorpusError> {
        let index = self.read_index()?;
        let mut reports = std::collections::BTreeMap::new();
        for filing in index.filings() {
            let body = self.get(&filing.accession_number)?.ok_or_else(|| {
                CorpusError::Integrity(format!(
                    "index references {} but the store has no body for it",
                    filing.accession_number
                ))
            })?;
            reports.insert(filing.accession_number.clone(), Arc::new(Report::new(filing, body)));
        }
        Ok(Corpus::from_parts(index, reports))
    }
}

impl Corpus {
    pub(crate) fn from_parts(index: CorpusIndex, reports: std::collections::BTreeMap<String, Arc<Report>>) -> Self {
        Self { index, reports }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = fixtures::bundled_corpus();
        corpus.save(dir.path()).unwrap();
        let loaded = Corpus::load(dir.path()).unwrap();
        assert_eq!(loaded.index().to_json(), corpus.index().to_json());
        let a: Vec<_> = loaded.reports().map(|r| (&r.filing.accession_number, &r.body)).collect();
        let b: Vec<_> = corpus.reports().map(|r| (&r.filing.accession_number, &r.body)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_body_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = fixtures::bundled_corpus();
        corpus.save(dir.path()).unwrap();
        let victim = corpus.reports().next().unwrap().filing.accession_number.clone();
        fs::remove_file(ReportStore::new(dir.path()).report_path(&victim)).unwrap();
        assert!(matches!(Corpus::load(dir.path()), Err(CorpusError::Integrity(_))));
    }
}
