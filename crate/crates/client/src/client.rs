use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use molbench_core::prompt::PromptRecord;
use molbench_core::transcript::{request_hash, Transcript, TRANSCRIPT_SCHEMA_VERSION};
use thiserror::Error;

use crate::config::{ConfigError, EndpointConfig};
use crate::wire::{build_request, data_uri, mime_for, ChatResponse};

/// Header carrying the prompt id; the mock server keys its script on it.
pub const PROMPT_ID_HEADER: &str = "x-prompt-id";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CallError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited (HTTP 429)")]
    RateLimited,
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("image {path}: {reason}")]
    Image { path: String, reason: String },
}

impl CallError {
    pub fn is_retryable(&self) -> bool {
        match self {
            CallError::Timeout | CallError::RateLimited | CallError::Transport(_) => true,
            CallError::HttpStatus(code) => *code >= 500,
            CallError::MalformedResponse(_) | CallError::Image { .. } => false,
        }
    }
}

/// A request ready to send: serialized body and its hash.
#[derive(Debug, Clone)]
pub struct PreparedRequest {
    pub body: Vec<u8>,
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    cfg: Arc<EndpointConfig>,
    api_key: Option<String>,
    image_root: PathBuf,
}

impl Client {
    /// `image_root` is the directory prompt image paths are relative to.
    pub fn new(cfg: EndpointConfig, image_root: &Path) -> Result<Client, ConfigError> {
        cfg.validate()?;
        let api_key = cfg.api_key()?;
        let http = reqwest::Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| ConfigError::BaseUrl(e.to_string()))?;
        Ok(Client {
            http,
            cfg: Arc::new(cfg),
            api_key,
            image_root: image_root.to_path_buf(),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub async fn prepare(&self, prompt: &PromptRecord) -> Result<PreparedRequest, CallError> {
        let path = self.image_root.join(&prompt.image_path);
        let bytes = tokio::fs::read(&path).await.map_err(|e| CallError::Image {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let req = build_request(&prompt.text, data_uri(mime_for(&prompt.image_path), &bytes), &self.cfg);
        let body = req.to_body();
        let hash = request_hash(&body);
        Ok(PreparedRequest { body, hash })
    }

    async fn send_once(&self, body: &[u8], prompt_id: &str) -> Result<String, CallError> {
        let mut req = self
            .http
            .post(self.cfg.completions_url())
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .header(PROMPT_ID_HEADER, prompt_id)
            .body(body.to_vec());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(transport_error)?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(CallError::RateLimited);
        }
        if !status.is_success() {
            return Err(CallError::HttpStatus(status.as_u16()));
        }
        let text = resp.text().await.map_err(transport_error)?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| CallError::MalformedResponse(e.to_string()))?;
        parsed
            .first_content()
            .map(str::to_string)
            .ok_or_else(|| CallError::MalformedResponse("no message content in first choice".to_string()))
    }

    /// Sends a prepared request, retrying transient failures. Returns the
    /// response text or the last error, plus the number of attempts.
    pub async fn send(&self, prepared: &PreparedRequest, prompt_id: &str) -> (Result<String, CallError>, u32) {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.send_once(&prepared.body, prompt_id).await {
                Ok(text) => return (Ok(text), attempts),
                Err(e) if e.is_retryable() && attempts <= self.cfg.max_retries => {
                    let wait = self.cfg.backoff.delay(attempts - 1, rand::random::<f64>());
                    log::debug!("{prompt_id}: {e}; retry {attempts} in {wait:?}");
                    tokio::time::sleep(wait).await;
                }
                Err(e) => return (Err(e), attempts),
            }
        }
    }

    /// Prepares, sends and records one prompt. Never fails: errors end up in
    /// the transcript. Latency covers all attempts including backoff.
    pub async fn complete(&self, prompt: &PromptRecord) -> Transcript {
        let start = Instant::now();
        let (outcome, attempts, hash) = match self.prepare(prompt).await {
            Ok(prepared) => {
                let (outcome, attempts) = self.send(&prepared, &prompt.prompt_id).await;
                (outcome, attempts, prepared.hash)
            }
            Err(e) => (Err(e), 0, request_hash(b"")),
        };
        self.transcript(prompt, hash, outcome, attempts, start.elapsed().as_millis() as u64)
    }

    pub(crate) fn transcript(
        &self,
        prompt: &PromptRecord,
        request_hash: String,
        outcome: Result<String, CallError>,
        attempts: u32,
        latency_ms: u64,
    ) -> Transcript {
        let (response, error) = match outcome {
            Ok(text) => (Some(text), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Transcript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            prompt_id: prompt.prompt_id.clone(),
            dataset: prompt.dataset.clone(),
            target_id: prompt.target_id,
            model: self.cfg.model_name.clone(),
            mode: prompt.mode,
            representation: prompt.representation,
            request_hash,
            response,
            error,
            latency_ms,
            attempts,
            temperature: Some(self.cfg.temperature),
            max_tokens: Some(self.cfg.max_tokens),
        }
    }
}

fn transport_error(e: reqwest::Error) -> CallError {
    if e.is_timeout() {
        CallError::Timeout
    } else {
        let mut msg = e.to_string();
        let mut src = std::error::Error::source(&e);
        while let Some(s) = src {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            src = s.source();
        }
        CallError::Transport(msg)
    }
}
