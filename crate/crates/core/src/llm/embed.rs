use std::hash::Hasher;
use std::sync::Arc;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::tokens::{ApproxTokenCounter, TokenCounter, EMBEDDING_TOKEN_LIMIT};
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, LlmError> {
    if a.dimension() != b.dimension() {
        return Err(LlmError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(LlmError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait EmbeddingBackend: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, LlmError>;
}

/// Hashed bag of words and adjacent word pairs, sublinear term frequency,
/// signed buckets, unit length.
#[derive(Debug, Clone)]
pub struct LocalHashEmbedder {
    dimension: usize,
}

impl LocalHashEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self { dimension: dimension.max(1) }
    }
}

impl Default for LocalHashEmbedder {
    fn default() -> Self {
        Self::new(1024)
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase)
}

impl EmbeddingBackend for LocalHashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, LlmError> {
        let mut counts: std::collections::BTreeMap<String, u32> = Default::default();
        let mut prev: Option<String> = None;
        for w in words(text) {
            if let Some(p) = prev.take() {
                *counts.entry(format!("{p} {w}")).or_default() += 1;
            }
            *counts.entry(w.clone()).or_default() += 1;
            prev = Some(w);
        }
        let mut v = vec![0.0; self.dimension];
        for (w, n) in counts {
            let mut h = FnvHasher::default();
            h.write(w.as_bytes());
            let bits = h.finish();
            let sign = if bits >> 63 == 1 { -1.0 } else { 1.0 };
            v[(bits % self.dimension as u64) as usize] += sign * (1.0 + f64::from(n).ln());
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Applies the input-token limit before handing text to a backend.
#[derive(Clone)]
pub struct Embedder {
    backend: Arc<dyn EmbeddingBackend>,
    counter: Arc<dyn TokenCounter>,
    token_limit: usize,
}

impl Embedder {
    pub fn new(backend: Arc<dyn EmbeddingBackend>, counter: Arc<dyn TokenCounter>) -> Self {
        Self { backend, counter, token_limit: EMBEDDING_TOKEN_LIMIT }
    }

    pub fn local() -> Self {
        Self::new(Arc::new(LocalHashEmbedder::default()), Arc::new(ApproxTokenCounter))
    }

    pub fn dimension(&self) -> usize {
        self.backend.dimension()
    }

    pub fn token_limit(&self) -> usize {
        self.token_limit
    }

    pub fn counter(&self) -> &Arc<dyn TokenCounter> {
        &self.counter
    }

    /// The exact text that would be sent for `text`.
    pub fn prepare<'a>(&self, text: &'a str) -> &'a str {
        self.counter.truncate(text, self.token_limit)
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        if text.trim().is_empty() {
            return Err(LlmError::Precondition("cannot embed empty text".into()));
        }
        let values = self.backend.embed_raw(self.prepare(text))?;
        if values.len() != self.backend.dimension() {
            return Err(LlmError::DimensionMismatch(values.len(), self.backend.dimension()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LlmError::Transport {
                message: "embedding contains non-finite values".into(),
                retryable: false,
            });
        }
        Ok(EmbeddingVector::new(values))
    }
}
