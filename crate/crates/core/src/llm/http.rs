//! OpenAI-compatible chat and embedding endpoints over blocking HTTP.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatMessage, ChatParams, EmbeddingBackend, LlmError};

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into()
}

fn post(agent: &ureq::Agent, url: &str, api_key: &str, body: serde_json::Value) -> Result<serde_json::Value, LlmError> {
    let mut resp = agent
        .post(url)
        .header("Authorization", &format!("Bearer {api_key}"))
        .send_json(body)
        .map_err(|e| LlmError::Transport { message: e.to_string(), retryable: true })?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| LlmError::Transport { message: e.to_string(), retryable: true })?;
    if !(200..300).contains(&status) {
        return Err(LlmError::Transport {
            message: format!("HTTP {status}: {text}"),
            retryable: status == 429 || status >= 500,
        });
    }
    serde_json::from_str(&text)
        .map_err(|e| LlmError::Transport { message: format!("bad JSON from {url}: {e}"), retryable: false })
}

pub struct OpenAiChat {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl OpenAiChat {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            agent: agent(Duration::from_secs(120)),
        }
    }
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessageOut,
}

#[derive(Deserialize)]
struct ChatMessageOut {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

impl ChatBackend for OpenAiChat {
    fn chat(&self, history: &[ChatMessage], params: &ChatParams) -> Result<String, LlmError> {
        let body = json!({
            "model": params.model_id,
            "messages": history,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let v = post(&self.agent, &format!("{}/chat/completions", self.base_url), &self.api_key, body)?;
        let parsed: ChatResponse = serde_json::from_value(v)
            .map_err(|e| LlmError::Transport { message: format!("unexpected chat response: {e}"), retryable: false })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or(LlmError::EmptyCompletion)
    }
}

pub struct OpenAiEmbeddings {
    base_url: String,
    api_key: String,
    model: String,
    dimension: usize,
    agent: ureq::Agent,
}

impl OpenAiEmbeddings {
    pub fn new(
        base_url: impl Into<String>,
        api_key: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
    ) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            model: model.into(),
            dimension,
            agent: agent(Duration::from_secs(60)),
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingData {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingData>,
}

impl EmbeddingBackend for OpenAiEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, LlmError> {
        let body = json!({ "model": self.model, "input": text });
        let v = post(&self.agent, &format!("{}/embeddings", self.base_url), &self.api_key, body)?;
        let parsed: EmbeddingResponse = serde_json::from_value(v).map_err(|e| LlmError::Transport {
            message: format!("unexpected embedding response: {e}"),
            retryable: false,
        })?;
        parsed.data.into_iter().next().map(|d| d.embedding).ok_or(LlmError::EmptyCompletion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{read_transcript, Gateway};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    /// Serves `responses` in order, one per connection, and returns the bodies
    /// it received.
    fn one_shot_server(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (format!("http://{addr}"), handle)
    }

    #[test]
    fn chat_posts_model_messages_temperature_and_logs_transcript() {
        let reply = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;
        let (url, server) = one_shot_server(vec![(200, reply.to_string())]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.jsonl");
        let g =
            Gateway::new(Arc::new(OpenAiChat::new(url, "k")), ChatParams::default()).with_transcript(&path).unwrap();
        let h = vec![ChatMessage::system("lecture"), ChatMessage::user("q")];
        assert_eq!(g.chat(&h).unwrap(), "hello");
        let sent: serde_json::Value = serde_json::from_str(&server.join().unwrap()[0]).unwrap();
        assert_eq!(sent["model"], "gpt-3.5-turbo");
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["messages"][1]["role"], "user");
        assert_eq!(read_transcript(&path).unwrap(), vec![(h, "hello".to_string())]);
    }

    #[test]
    fn server_errors_are_retryable() {
        let (url, server) = one_shot_server(vec![(503, "{}".to_string())]);
        let err = OpenAiChat::new(url, "k").chat(&[ChatMessage::user("q")], &ChatParams::default()).unwrap_err();
        server.join().unwrap();
        assert!(err.is_retryable());
    }

    #[test]
    fn embeddings_parse_first_vector() {
        let (url, server) = one_shot_server(vec![(200, r#"{"data":[{"embedding":[0.5,0.25]}]}"#.to_string())]);
        let e = OpenAiEmbeddings::new(url, "k", "text-embedding-ada-002", 2);
        assert_eq!(e.embed_raw("x").unwrap(), vec![0.5, 0.25]);
        let sent: serde_json::Value = serde_json::from_str(&server.join().unwrap()[0]).unwrap();
        assert_eq!(sent["input"], "x");
    }
}
