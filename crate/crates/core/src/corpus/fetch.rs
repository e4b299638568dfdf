//! Filing discovery and download against an EDGAR-style source.
//!
//! The source is either an HTTP base URL or a local directory laid out the
//! same way: a `form.idx` listing plus one file per filing. Every outbound
//! request carries the configured contact string and passes through a
//! sliding-window rate limiter.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::NaiveDate;

use super::{CorpusError, FilingRef, RawReport, ReportStore};

pub const CONTACT_ENV: &str = "GROUNDFLOW_CONTACT";

#[derive(Debug, Clone)]
pub struct SourceConfig {
    pub base_url: String,
    /// Sent as `User-Agent` on every request.
    pub contact: String,
    pub rate_limit: u32,
    pub max_attempts: u32,
    pub retry_backoff: Duration,
    pub index_path: String,
}

impl SourceConfig {
    pub fn new(base_url: impl Into<String>, contact: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            contact: contact.into(),
            rate_limit: 10,
            max_attempts: 3,
            retry_backoff: Duration::from_millis(500),
            index_path: "form.idx".to_string(),
        }
    }

    /// Contact string from `GROUNDFLOW_CONTACT`, falling back to `default`.
    pub fn contact_from_env(default: &str) -> String {
        std::env::var(CONTACT_ENV).unwrap_or_else(|_| default.to_string())
    }

    pub fn is_local(&self) -> bool {
        !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://"))
    }

    pub fn resolve(&self, path: &str) -> String {
        if path.starts_with("http://") || path.starts_with("https://") || path.starts_with('/') {
            return path.to_string();
        }
        format!("{}/{}", self.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// One GET. `Err` means the request never produced a response.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> Result<HttpResponse, String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> Result<HttpResponse, String> {
        let mut req = self.agent.get(url);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let mut resp = req.call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().with_config().limit(256 * 1024 * 1024).read_to_vec().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Serves URLs that are filesystem paths. A missing file answers 404.
#[derive(Debug, Default, Clone)]
pub struct DirTransport;

impl Transport for DirTransport {
    fn get(&self, url: &str, _headers: &[(&str, &str)]) -> Result<HttpResponse, String> {
        let path = Path::new(url.strip_prefix("file://").unwrap_or(url));
        match std::fs::read(path) {
            Ok(body) => Ok(HttpResponse { status: 200, body }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HttpResponse { status: 404, body: Vec::new() }),
            Err(e) => Err(e.to_string()),
        }
    }
}

pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Sliding-window limiter: at most `limit` grants in any `window`-long
/// half-open interval.
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    grants: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(limit: u32, window: Duration, clock: Arc<dyn Clock>) -> Self {
        Self { limit: limit.max(1) as usize, window, clock, grants: Mutex::new(VecDeque::new()) }
    }

    pub fn per_second(limit: u32, clock: Arc<dyn Clock>) -> Self {
        Self::new(limit, Duration::from_secs(1), clock)
    }

    /// Blocks until a request may go out, then records it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut grants = self.grants.lock().unwrap();
                let now = self.clock.now();
                while grants.front().is_some_and(|t| *t + self.window <= now) {
                    grants.pop_front();
                }
                if grants.len() < self.limit {
                    grants.push_back(now);
                    return;
                }
                *grants.front().unwrap() + self.window - now
            };
            self.clock.sleep(wait);
        }
    }
}

/// Transport, limiter and retry policy bundled for one source.
pub struct SourceClient {
    pub config: SourceConfig,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

impl SourceClient {
    pub fn new(config: SourceConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        let limiter = RateLimiter::per_second(config.rate_limit, clock.clone());
        Self { config, transport, limiter, clock }
    }

    /// Picks the directory or HTTP transport from the base URL.
    pub fn for_source(config: SourceConfig) -> Self {
        let transport: Arc<dyn Transport> =
            if config.is_local() { Arc::new(DirTransport) } else { Arc::new(HttpTransport::default()) };
        Self::new(config, transport, Arc::new(SystemClock::default()))
    }

    pub fn get(&self, path: &str) -> Result<Vec<u8>, CorpusError> {
        let url = self.config.resolve(path);
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            self.limiter.acquire();
            match self.transport.get(&url, &[("User-Agent", self.config.contact.as_str())]) {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp.body),
                Ok(resp) => return Err(CorpusError::Status { url, status: resp.status }),
                Err(e) => {
                    log::warn!("GET {url} failed (attempt {attempt}/{attempts}): {e}");
                    last = e;
                    if attempt < attempts {
                        self.clock.sleep(self.config.retry_backoff * attempt);
                    }
                }
            }
        }
        Err(CorpusError::Retryable { url, attempts, reason: last })
    }
}

/// Inclusive filing-date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateWindow {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl DateWindow {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Self {
        Self { from, to }
    }

    pub fn all() -> Self {
        Self { from: NaiveDate::MIN, to: NaiveDate::MAX }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.from <= d && d <= self.to
    }
}

/// Parses an EDGAR `form.idx` listing: a header, a dashed separator line, then
/// rows of `form  company  cik  date  file` (company names may contain spaces).
pub fn parse_form_index(text: &str) -> Result<Vec<(String, FilingRef)>, CorpusError> {
    let mut offset = 0;
    let mut rows_start = None;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        offset += line.len();
        if trimmed.len() >= 3 && trimmed.chars().all(|c| c == '-') {
            rows_start = Some(offset);
            break;
        }
    }
    let Some(start) = rows_start else {
        if text.trim().is_empty() {
            return Ok(Vec::new());
        }
        return Err(CorpusError::Parse { offset: 0, reason: "no separator line before index rows".into() });
    };

    let mut out = Vec::new();
    let mut offset = start;
    for line in text[start..].split_inclusive('\n') {
        let line_offset = offset;
        offset += line.len();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 5 {
            return Err(CorpusError::Parse {
                offset: line_offset,
                reason: format!("expected 5 columns, found {}", tokens.len()),
            });
        }
        let file = tokens[tokens.len() - 1];
        let date = NaiveDate::parse_from_str(tokens[tokens.len() - 2], "%Y-%m-%d").map_err(|e| CorpusError::Parse {
            offset: line_offset,
            reason: format!("bad filing date {:?}: {e}", tokens[tokens.len() - 2]),
        })?;
        let accession =
            Path::new(file).file_stem().and_then(|s| s.to_str()).filter(|s| !s.is_empty()).ok_or_else(|| {
                CorpusError::Parse { offset: line_offset, reason: format!("no accession number in {file:?}") }
            })?;
        out.push((tokens[0].to_string(), FilingRef::new(accession, date, file)));
    }
    Ok(out)
}

/// N-CEN filings inside `window`, newest first.
pub fn fetch_filings(client: &SourceClient, window: DateWindow) -> Result<Vec<FilingRef>, CorpusError> {
    let raw = client.get(&client.config.index_path)?;
    let text = String::from_utf8_lossy(&raw);
    let mut refs: Vec<FilingRef> = parse_form_index(&text)?
        .into_iter()
        .filter(|(form, f)| form == "N-CEN" && window.contains(f.filing_date))
        .map(|(_, mut f)| {
            f.source_url = client.config.resolve(&f.source_url);
            f
        })
        .collect();
    refs.sort_by(|a, b| b.filing_date.cmp(&a.filing_date).then_with(|| b.accession_number.cmp(&a.accession_number)));
    Ok(refs)
}

/// Downloads one filing, serving it from `store` when already present.
pub fn download_report(
    client: &SourceClient,
    store: &ReportStore,
    filing: &FilingRef,
) -> Result<RawReport, CorpusError> {
    if let Some(body) = store.get(&filing.accession_number)? {
        return Ok(RawReport { filing: filing.clone(), body });
    }
    let bytes = client.get(&filing.source_url)?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(CorpusError::Integrity(format!("empty body for {}", filing.accession_number)));
    }
    let body = String::from_utf8_lossy(&bytes).into_owned();
    store.put(&filing.accession_number, &body)?;
    Ok(RawReport { filing: filing.clone(), body })
}

/// Downloads with up to `workers` threads; the shared limiter caps throughput.
/// Results keep the order of `refs`.
pub fn download_all(
    client: &SourceClient,
    store: &ReportStore,
    refs: &[FilingRef],
    workers: usize,
) -> Vec<Result<RawReport, CorpusError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RawReport, CorpusError>>>> = refs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, refs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(filing) = refs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(download_report(client, store, filing));
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
}
