//! Blocking HTTP clients for the external model, captioning and embedding services.
//!
//! Wire formats, all `POST` with JSON bodies:
//! - model: `{"prompt", "temperature", "top_p", "max_tokens", "seed"?}` -> `{"text"}`
//! - captioner: `{"prompt", "images"?: [base64 PNG], "sequence"?}` -> `{"text"}`
//! - embedder: `{"texts": [..]}` or `{"images": [base64 PNG]}` -> `{"embeddings": [[..]]}`
//!
//! Construct these outside any async runtime; calls block the current thread.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sketchedit_core::captioning::{CaptionBackend, CaptionError, StepContext};
use sketchedit_core::metrics::{EmbeddingBackend, MetricsError};
use sketchedit_core::pipeline::{ModelBackend, PipelineError, SamplingConfig};

use crate::config::Endpoint;

#[derive(Debug, Clone)]
struct Http {
    url: String,
    token: Option<String>,
    client: Client,
}

impl Http {
    fn new(url: &str, endpoint: &Endpoint) -> Result<Self, String> {
        let client = Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs.max(1)))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Http { url: url.to_string(), token: endpoint.token.clone(), client })
    }

    /// Transport failures and non-success statuses are reported as `Err`.
    fn post<T: DeserializeOwned>(&self, body: &Value) -> Result<T, String> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(format!("{status}: {}", text.chars().take(200).collect::<String>()));
        }
        resp.json::<T>().map_err(|e| format!("malformed response: {e}"))
    }
}

#[derive(Deserialize)]
struct TextReply {
    text: String,
}

#[derive(Deserialize)]
struct EmbeddingReply {
    embeddings: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    max_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct HttpModelBackend(Http);

impl HttpModelBackend {
    pub fn new(url: &str, endpoint: &Endpoint) -> Result<Self, String> {
        Http::new(url, endpoint).map(HttpModelBackend)
    }
}

impl ModelBackend for HttpModelBackend {
    fn complete(&self, prompt: &str, s: &SamplingConfig) -> Result<String, PipelineError> {
        let body = CompletionRequest {
            prompt,
            temperature: s.temperature,
            top_p: s.top_p,
            max_tokens: s.max_tokens,
            seed: s.seed,
        };
        let body = serde_json::to_value(body).expect("request serializes");
        self.0.post::<TextReply>(&body).map(|r| r.text).map_err(PipelineError::BackendUnavailable)
    }
}

#[derive(Debug, Clone)]
pub struct HttpCaptionBackend(Http);

impl HttpCaptionBackend {
    pub fn new(url: &str, endpoint: &Endpoint) -> Result<Self, String> {
        Http::new(url, endpoint).map(HttpCaptionBackend)
    }

    fn send(&self, body: Value) -> Result<String, CaptionError> {
        self.0.post::<TextReply>(&body).map(|r| r.text).map_err(CaptionError::BackendUnavailable)
    }
}

impl CaptionBackend for HttpCaptionBackend {
    fn describe_image(&self, images: &[Vec<u8>], prompt: &str, _ctx: &StepContext<'_>) -> Result<String, CaptionError> {
        let images: Vec<String> = images.iter().map(|i| B64.encode(i)).collect();
        self.send(json!({ "prompt": prompt, "images": images }))
    }

    fn describe_sequence(&self, text: &str, prompt: &str, _ctx: &StepContext<'_>) -> Result<String, CaptionError> {
        self.send(json!({ "prompt": prompt, "sequence": text }))
    }

    fn complete(&self, prompt: &str, _ctx: &StepContext<'_>) -> Result<String, CaptionError> {
        self.send(json!({ "prompt": prompt }))
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbeddingBackend(Http);

impl HttpEmbeddingBackend {
    pub fn new(url: &str, endpoint: &Endpoint) -> Result<Self, String> {
        Http::new(url, endpoint).map(HttpEmbeddingBackend)
    }

    fn embed(&self, body: Value, expected: usize) -> Result<Vec<Vec<f64>>, MetricsError> {
        let reply = self.0.post::<EmbeddingReply>(&body).map_err(MetricsError::Backend)?;
        if reply.embeddings.len() != expected {
            return Err(MetricsError::Backend(format!(
                "expected {expected} embeddings, got {}",
                reply.embeddings.len()
            )));
        }
        Ok(reply.embeddings)
    }
}

impl EmbeddingBackend for HttpEmbeddingBackend {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, MetricsError> {
        self.embed(json!({ "texts": texts }), texts.len())
    }

    fn embed_images(&self, images: &[Vec<u8>]) -> Result<Vec<Vec<f64>>, MetricsError> {
        let images: Vec<String> = images.iter().map(|i| B64.encode(i)).collect();
        self.embed(json!({ "images": images }), images.len())
    }
}
