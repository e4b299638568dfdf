//! The single configuration file plus environment overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use groundflow_core::ExecLimits;

pub const API_KEY_ENV: &str = "GROUNDFLOW_API_KEY";
pub const CONTACT_ENV: &str = groundflow_core::corpus::fetch::CONTACT_ENV;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChatBackendKind {
    /// Recorded replies; the bundled golden and feedback conversations when
    /// no files are listed.
    #[default]
    Replay,
    /// Golden code degraded according to the lecture variant.
    Simulated,
    /// An OpenAI-compatible chat completions endpoint.
    Openai,
    /// Always unavailable.
    Offline,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub backend: ChatBackendKind,
    pub replay: Vec<PathBuf>,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Appends every exchange here as JSONL.
    pub transcript: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        let params = groundflow_core::ChatParams::default();
        Self {
            backend: ChatBackendKind::default(),
            replay: Vec::new(),
            base_url: "https://api.openai.com/v1".into(),
            model: params.model_id,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            transcript: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingBackendKind {
    #[default]
    Local,
    Openai,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub backend: EmbeddingBackendKind,
    pub model: String,
    pub dimension: usize,
    pub index: PathBuf,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            backend: EmbeddingBackendKind::Local,
            model: "text-embedding-ada-002".into(),
            dimension: 1024,
            index: PathBuf::from("groundflow-index.jsonl"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_steps: u64,
    pub max_api_calls: u64,
    pub max_value_bytes: u64,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let d = ExecLimits::default();
        Self { max_steps: d.max_steps, max_api_calls: d.max_api_calls, max_value_bytes: d.max_value_bytes }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// URL prefix or local directory holding `form.idx` and the filings.
    pub base_url: String,
    pub contact: String,
    pub rate_limit: u32,
    pub index_path: String,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            base_url: "https://www.sec.gov/Archives".into(),
            contact: "groundflow research contact@example.org".into(),
            rate_limit: 10,
            index_path: "edgar/full-index/form.idx".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Store directory written by `ingest`; the bundled filings when unset.
    pub corpus_dir: Option<PathBuf>,
    /// API registry JSON; the built-in N-CEN registry when unset.
    pub registry: Option<PathBuf>,
    /// Question set; the bundled one when unset.
    pub dataset: Option<PathBuf>,
    pub store_dir: PathBuf,
    pub lecture_variant: String,
    pub bind: String,
    pub gateway: GatewayConfig,
    pub embedding: EmbeddingConfig,
    pub limits: LimitsConfig,
    pub source: SourceSection,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            corpus_dir: None,
            registry: None,
            dataset: None,
            store_dir: PathBuf::from("groundflow-sessions"),
            lecture_variant: "FULL".into(),
            bind: "127.0.0.1:8080".into(),
            gateway: GatewayConfig::default(),
            embedding: EmbeddingConfig::default(),
            limits: LimitsConfig::default(),
            source: SourceSection::default(),
            api_key: None,
        }
    }
}

impl Config {
    /// Parses TOML. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut c: Config = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: base.to_path_buf(), message: e.to_string() })?;
        c.resolve_paths(base);
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    /// Reads `GROUNDFLOW_API_KEY` and `GROUNDFLOW_CONTACT`.
    pub fn apply_env(mut self) -> Self {
        self.apply_env_from(|k| std::env::var(k).ok());
        self
    }

    pub fn apply_env_from(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(k) = get(API_KEY_ENV).filter(|k| !k.is_empty()) {
            self.api_key = Some(k);
        }
        if let Some(c) = get(CONTACT_ENV).filter(|c| !c.is_empty()) {
            self.source.contact = c;
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.corpus_dir, &mut self.registry, &mut self.dataset, &mut self.gateway.transcript]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.store_dir);
        fix(&mut self.embedding.index);
        self.gateway.replay.iter_mut().for_each(fix);
        let b = &mut self.source.base_url;
        if !(b.starts_with("http://") || b.starts_with("https://")) && Path::new(b.as_str()).is_relative() {
            *b = base.join(b.as_str()).to_string_lossy().into_owned();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lecture_variant
            .parse::<groundflow_core::LectureVariant>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.exec_limits()?;
        if self.embedding.dimension == 0 {
            return Err(ConfigError::Invalid("embedding.dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn exec_limits(&self) -> Result<ExecLimits, ConfigError> {
        let l = &self.limits;
        ExecLimits::new(l.max_steps, l.max_api_calls, l.max_value_bytes).map_err(ConfigError::Invalid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml("", Path::new("/etc/gf")).unwrap();
        assert_eq!(c.gateway.backend, ChatBackendKind::Replay);
        assert_eq!(c.store_dir, PathBuf::from("/etc/gf/groundflow-sessions"));
        assert_eq!(c.limits.max_steps, 100_000);
        assert!(c.corpus_dir.is_none());
    }

    #[test]
    fn sections_and_relative_paths() {
        let text = r#"
corpus_dir = "corpus"
lecture_variant = "nct"
[gateway]
backend = "simulated"
replay = ["a.jsonl", "/abs/b.jsonl"]
[limits]
max_steps = 500
[source]
base_url = "filings"
"#;
        let c = Config::from_toml(text, Path::new("/w")).unwrap();
        assert_eq!(c.corpus_dir.as_deref(), Some(Path::new("/w/corpus")));
        assert_eq!(c.gateway.replay, [PathBuf::from("/w/a.jsonl"), PathBuf::from("/abs/b.jsonl")]);
        assert_eq!(c.exec_limits().unwrap().max_steps, 500);
        assert_eq!(c.source.base_url, "/w/filings");
    }

    #[test]
    fn rejects_unknown_keys_bad_variants_and_zero_limits() {
        assert!(matches!(Config::from_toml("colour = 1", Path::new(".")), Err(ConfigError::Parse { .. })));
        assert!(matches!(Config::from_toml("lecture_variant = \"XYZ\"", Path::new(".")), Err(ConfigError::Invalid(_))));
        assert!(Config::from_toml("[limits]\nmax_api_calls = 0", Path::new(".")).is_err());
    }

    #[test]
    fn env_overrides_secrets_and_contact() {
        let mut c = Config::default();
        c.apply_env_from(|k| match k {
            API_KEY_ENV => Some("sk-test".into()),
            CONTACT_ENV => Some("Jane Roe jr@example.org".into()),
            _ => None,
        });
        assert_eq!(c.api_key.as_deref(), Some("sk-test"));
        assert_eq!(c.source.contact, "Jane Roe jr@example.org");
    }
}
