//! Builds the engine pieces a command needs from the configuration.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use groundflow_core::baseline::{build_index, Baseline, BaselineMethod, EmbeddingIndex};
use groundflow_core::dataset::{self, QaItem};
use groundflow_core::evaluator::{
    feedback_scenarios, golden_replay, FaultInjectingBackend, FaultRates, Method, WorkflowMethod,
};
use groundflow_core::lecture::{load_registry, ncen_registry, render_lecture};
use groundflow_core::llm::{
    ApproxTokenCounter, Embedder, EmbeddingBackend, Gateway, LocalHashEmbedder, OfflineBackend, OpenAiChat,
    OpenAiEmbeddings, ScriptedBackend,
};
use groundflow_core::orchestrator::{Orchestrator, SessionStore};
use groundflow_core::{
    fixtures, ApiDescriptor, ChatBackend, ChatParams, Corpus, LectureConfig, LectureVariant, NcenApi,
};

use crate::config::{ChatBackendKind, Config, EmbeddingBackendKind, API_KEY_ENV};

/// Method names accepted by `bench`.
pub const METHOD_NAMES: [&str; 6] = ["groundflow", "groundflow+feedback", "baseline", "nct", "ba", "ncp"];

/// Sent once after the first draft by the `groundflow+feedback` method.
pub const BENCH_FEEDBACK: &str =
    "Check that every fund name and item label in the code is copied exactly from the question, then run it again.";

pub struct App {
    pub config: Config,
    pub api: Arc<NcenApi>,
    pub registry: Vec<ApiDescriptor>,
}

impl App {
    pub fn new(config: Config) -> Result<Self> {
        let corpus = match &config.corpus_dir {
            Some(dir) => Corpus::load(dir).with_context(|| format!("loading corpus from {}", dir.display()))?,
            None => fixtures::bundled_corpus(),
        };
        let registry = match &config.registry {
            Some(p) => load_registry(p)?,
            None => ncen_registry(),
        };
        Ok(Self { api: Arc::new(NcenApi::new(Arc::new(corpus))), registry, config })
    }

    pub fn variant(&self) -> LectureVariant {
        self.config.lecture_variant.parse().expect("validated with the config")
    }

    pub fn dataset(&self) -> Result<Vec<QaItem>> {
        self.dataset_from(self.config.dataset.as_deref())
    }

    pub fn dataset_from(&self, path: Option<&Path>) -> Result<Vec<QaItem>> {
        Ok(match path {
            Some(p) => dataset::load(p).with_context(|| format!("loading dataset {}", p.display()))?,
            None => fixtures::bundled_dataset(),
        })
    }

    /// The configured chat backend. Replay without files serves the golden
    /// conversation for every item in `items` and every template question
    /// over the corpus, under every lecture variant, plus the recorded
    /// feedback scenarios.
    pub fn chat_backend(&self, items: &[QaItem]) -> Result<Arc<dyn ChatBackend>> {
        let g = &self.config.gateway;
        Ok(match g.backend {
            ChatBackendKind::Offline => Arc::new(OfflineBackend),
            ChatBackendKind::Openai => {
                let Some(key) = &self.config.api_key else {
                    bail!("the openai backend needs {API_KEY_ENV}");
                };
                Arc::new(OpenAiChat::new(&g.base_url, key))
            }
            ChatBackendKind::Simulated => Arc::new(FaultInjectingBackend::new(items, FaultRates::default())?),
            ChatBackendKind::Replay if !g.replay.is_empty() => {
                let mut s = ScriptedBackend::strict();
                for p in &g.replay {
                    s.extend(&ScriptedBackend::load(p).map_err(anyhow::Error::msg)?);
                }
                Arc::new(s)
            }
            ChatBackendKind::Replay => Arc::new(self.builtin_replay(items)?),
        })
    }

    fn builtin_replay(&self, items: &[QaItem]) -> Result<ScriptedBackend> {
        let mut all = dataset::template_items(self.api.corpus(), fixtures::DATASET_SEED)?;
        all.extend_from_slice(items);
        let mut s = ScriptedBackend::strict();
        for v in LectureVariant::ALL {
            let lecture = render_lecture(&self.registry, &LectureConfig::new(v))?;
            s.extend(&golden_replay(&all, &lecture.text)?);
        }
        let lecture = LectureConfig::new(self.variant());
        for scenario in feedback_scenarios() {
            s.extend(&scenario.record(self.api.clone(), self.registry.clone(), &lecture)?);
        }
        Ok(s)
    }

    pub fn gateway(&self, backend: Arc<dyn ChatBackend>) -> Result<Gateway> {
        let g = &self.config.gateway;
        let params = ChatParams { model_id: g.model.clone(), temperature: g.temperature, max_tokens: g.max_tokens };
        let gw = Gateway::new(backend, params);
        Ok(match &g.transcript {
            Some(p) => gw.with_transcript(p).with_context(|| format!("opening transcript {}", p.display()))?,
            None => gw,
        })
    }

    pub fn orchestrator(&self, items: &[QaItem]) -> Result<Orchestrator> {
        let gateway = self.gateway(self.chat_backend(items)?)?;
        Ok(Orchestrator::new(gateway, self.api.clone(), self.registry.clone())
            .with_limits(self.config.exec_limits()?)
            .with_store(SessionStore::new(&self.config.store_dir)))
    }

    pub fn embedder(&self) -> Result<Embedder> {
        let e = &self.config.embedding;
        let backend: Arc<dyn EmbeddingBackend> = match e.backend {
            EmbeddingBackendKind::Local => Arc::new(LocalHashEmbedder::new(e.dimension)),
            EmbeddingBackendKind::Openai => {
                let Some(key) = &self.config.api_key else {
                    bail!("the openai embedding backend needs {API_KEY_ENV}");
                };
                Arc::new(OpenAiEmbeddings::new(&self.config.gateway.base_url, key, &e.model, e.dimension))
            }
        };
        Ok(Embedder::new(backend, Arc::new(ApproxTokenCounter)))
    }

    pub fn build_index(&self) -> Result<EmbeddingIndex> {
        Ok(build_index(&self.api.all_blocks(), &self.embedder()?)?)
    }

    /// Loads the saved index, or builds one in memory when the file is absent.
    pub fn baseline(&self, items: &[QaItem]) -> Result<Baseline> {
        let path = &self.config.embedding.index;
        let index = if path.exists() {
            EmbeddingIndex::load(path).with_context(|| format!("loading index {}", path.display()))?
        } else {
            log::info!("{} not found; building the index in memory", path.display());
            self.build_index()?
        };
        let gateway = self.gateway(self.chat_backend(items)?)?;
        Ok(Baseline::new(&self.api, index, self.embedder()?, gateway))
    }

    pub fn method(&self, name: &str, items: &[QaItem]) -> Result<Box<dyn Method>> {
        let workflow =
            |variant| -> Result<WorkflowMethod> { Ok(WorkflowMethod::new(name, self.orchestrator(items)?, variant)) };
        Ok(match name {
            "groundflow" => Box::new(workflow(LectureVariant::Full)?),
            "groundflow+feedback" => {
                let feedback = items.iter().map(|i| (i.id.clone(), BENCH_FEEDBACK.to_string())).collect();
                Box::new(workflow(LectureVariant::Full)?.with_feedback(feedback))
            }
            "nct" => Box::new(workflow(LectureVariant::Nct)?),
            "ba" => Box::new(workflow(LectureVariant::Ba)?),
            "ncp" => Box::new(workflow(LectureVariant::Ncp)?),
            "baseline" => Box::new(BaselineMethod::new(name, Arc::new(self.baseline(items)?))),
            other => bail!(crate::UsageError(format!(
                "unknown method `{other}`; expected one of {}",
                METHOD_NAMES.join(", ")
            ))),
        })
    }
}
