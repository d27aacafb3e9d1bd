//! Completion backends: a deterministic scripted backend for tests and
//! offline runs, and an HTTP client for OpenAI-compatible chat endpoints.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use super::{CompletionRequest, GatewayError};

/// Raw backend reply: text plus token usage when the provider reports it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendResponse {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Usage {
    pub request_tokens: u64,
    pub response_tokens: u64,
}

/// A chat-completion provider. Implementations either answer in full or
/// raise [`GatewayError::Transport`]; partial/truncated replies are not part
/// of the contract.
pub trait Backend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<BackendResponse, GatewayError>;
}

/// One request as seen by the scripted backend, kept for assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub stage_label: String,
    pub system_text: String,
    pub user_text: String,
}

struct ScriptState {
    responses: VecDeque<String>,
    requests: Vec<RecordedRequest>,
    calls: usize,
}

/// Replays a fixed list of responses in order and records every request.
/// Clones share state, so a test can keep a handle while the gateway owns
/// another.
#[derive(Clone)]
pub struct ScriptedBackend {
    state: Arc<Mutex<ScriptState>>,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedBackend {
            state: Arc::new(Mutex::new(ScriptState {
                responses: responses.into(),
                requests: Vec::new(),
                calls: 0,
            })),
        }
    }

    pub fn from_strs(responses: &[&str]) -> Self {
        Self::new(responses.iter().map(|s| s.to_string()).collect())
    }

    /// Every request issued so far, in order.
    pub fn recorded(&self) -> Vec<RecordedRequest> {
        self.state.lock().unwrap().requests.clone()
    }

    /// Number of times the backend was actually invoked.
    pub fn calls(&self) -> usize {
        self.state.lock().unwrap().calls
    }

    /// Responses not yet consumed.
    pub fn remaining(&self) -> usize {
        self.state.lock().unwrap().responses.len()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let mut state = self.state.lock().unwrap();
        state.calls += 1;
        state.requests.push(RecordedRequest {
            stage_label: req.stage_label.clone(),
            system_text: req.system_text.clone(),
            user_text: req.user_text.clone(),
        });
        match state.responses.pop_front() {
            Some(text) => Ok(BackendResponse { text, usage: None }),
            None => Err(GatewayError::Transport {
                stage: req.stage_label.clone(),
                message: "script exhausted".to_string(),
            }),
        }
    }
}

/// Settings for the HTTP backend, normally read from the environment:
/// `MIMIC_API_KEY`, `MIMIC_API_BASE`, `MIMIC_MODEL`.
#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub api_key: String,
    pub api_base: String,
    pub model: String,
}

impl HttpBackendConfig {
    pub const DEFAULT_API_BASE: &'static str = "https://api.openai.com/v1";
    pub const DEFAULT_MODEL: &'static str = "gpt-4o";

    /// Reads the standard environment variables. Only the API key is
    /// required.
    pub fn from_env() -> Result<Self, String> {
        let api_key = std::env::var("MIMIC_API_KEY")
            .map_err(|_| "MIMIC_API_KEY is not set".to_string())?;
        if api_key.trim().is_empty() {
            return Err("MIMIC_API_KEY is empty".to_string());
        }
        let api_base = std::env::var("MIMIC_API_BASE")
            .unwrap_or_else(|_| Self::DEFAULT_API_BASE.to_string());
        let model =
            std::env::var("MIMIC_MODEL").unwrap_or_else(|_| Self::DEFAULT_MODEL.to_string());
        Ok(HttpBackendConfig {
            api_key,
            api_base,
            model,
        })
    }
}

/// Blocking client for any OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(300))
            .build()
            .map_err(|e| GatewayError::Transport {
                stage: "init".to_string(),
                message: format!("failed to build HTTP client: {e}"),
            })?;
        Ok(HttpBackend { config, client })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let url = format!(
            "{}/chat/completions",
            self.config.api_base.trim_end_matches('/')
        );
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_output_tokens,
        });
        let transport = |message: String| GatewayError::Transport {
            stage: req.stage_label.clone(),
            message,
        };
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send()
            .map_err(|e| transport(format!("request failed: {e}")))?;
        let status = response.status();
        let payload: serde_json::Value = response
            .json()
            .map_err(|e| transport(format!("invalid response body: {e}")))?;
        if !status.is_success() {
            let detail = payload
                .pointer("/error/message")
                .and_then(|v| v.as_str())
                .unwrap_or("no error detail");
            return Err(transport(format!("HTTP {status}: {detail}")));
        }
        let text = payload
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| transport("response carries no message content".to_string()))?
            .to_string();
        let usage = match (
            payload.pointer("/usage/prompt_tokens").and_then(|v| v.as_u64()),
            payload
                .pointer("/usage/completion_tokens")
                .and_then(|v| v.as_u64()),
        ) {
            (Some(request_tokens), Some(response_tokens)) => Some(Usage {
                request_tokens,
                response_tokens,
            }),
            _ => None,
        };
        Ok(BackendResponse { text, usage })
    }
}
