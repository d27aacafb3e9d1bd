//! Uniform access to chat completions with structured-output parsing,
//! bounded repair/retry, optional response caching, spend tracking, and a
//! per-meeting call trace.
//!
//! One [`Gateway`] instance serves one meeting; instances are independent
//! and internally locked, so meetings can run on parallel threads against a
//! shared [`Backend`]. Within a meeting, calls are sequential.

mod backends;
pub mod repair;

pub use backends::{
    Backend, BackendResponse, HttpBackend, HttpBackendConfig, RecordedRequest, ScriptedBackend,
    Usage,
};
pub use repair::{Delimiter, Shape, StructuredValue};

use std::sync::{Arc, Mutex};
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::TraceRecord;

/// Sampling parameters for one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        // Defaults mirror typical provider defaults; stages raise the output
        // budget where long scene rewrites are expected.
        CompletionParams {
            temperature: 1.0,
            max_output_tokens: 4096,
        }
    }
}

/// One completion call. `stage_label` names the pipeline step for tracing
/// and per-stage temperature overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub system_text: String,
    pub user_text: String,
    pub params: CompletionParams,
    pub stage_label: String,
}

impl CompletionRequest {
    pub fn new(
        stage_label: impl Into<String>,
        system_text: impl Into<String>,
        user_text: impl Into<String>,
    ) -> Self {
        let user_text: String = user_text.into();
        debug_assert!(!user_text.is_empty(), "user_text must be non-empty");
        CompletionRequest {
            system_text: system_text.into(),
            user_text,
            params: CompletionParams::default(),
            stage_label: stage_label.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.params.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, max_output_tokens: u32) -> Self {
        self.params.max_output_tokens = max_output_tokens;
        self
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    /// Network, auth, provider, or script-exhaustion failure.
    #[error("transport error in {stage}: {message}")]
    Transport { stage: String, message: String },
    /// The configured spend cap was reached; no further calls are issued.
    #[error("budget exhausted: spent ${spent:.4} against cap ${cap:.4}")]
    Budget { spent: f64, cap: f64 },
    /// Every parse attempt failed; raw responses are preserved for debugging.
    #[error("malformed response in {stage} after {attempt_count} attempt(s)", attempt_count = attempts.len())]
    Malformed { stage: String, attempts: Vec<String> },
}

/// Per-token prices used for cost estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pricing {
    pub usd_per_request_token: f64,
    pub usd_per_response_token: f64,
}

impl Default for Pricing {
    fn default() -> Self {
        // $2.50 / $10.00 per million tokens.
        Pricing {
            usd_per_request_token: 2.5e-6,
            usd_per_response_token: 1.0e-5,
        }
    }
}

/// Gateway behavior knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// Serve repeated identical requests from memory. Off by default so
    /// call-counting stays exact; live runs opt in for cheap reruns.
    pub cache_enabled: bool,
    /// Hard spend cap in USD; `None` means unlimited.
    pub budget_usd: Option<f64>,
    pub pricing: Pricing,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            cache_enabled: false,
            budget_usd: None,
            pricing: Pricing::default(),
        }
    }
}

/// A trace record paired with the measured wall time. Wall times go to the
/// side-channel trace file only, keeping transcript bytes run-independent.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimedTraceRecord {
    #[serde(flatten)]
    pub record: TraceRecord,
    pub wall_time_ms: u64,
}

struct GatewayState {
    cache: std::collections::BTreeMap<String, String>,
    trace: Vec<TimedTraceRecord>,
    spent_usd: f64,
}

/// Completion front-end owning the cache, trace, and budget for one meeting.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    config: GatewayConfig,
    state: Mutex<GatewayState>,
}

/// Estimated token count for text without usage metadata: ⌈chars/4⌉.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, config: GatewayConfig) -> Self {
        Gateway {
            backend,
            config,
            state: Mutex::new(GatewayState {
                cache: std::collections::BTreeMap::new(),
                trace: Vec::new(),
                spent_usd: 0.0,
            }),
        }
    }

    /// Convenience constructor for scripted runs.
    pub fn scripted(backend: ScriptedBackend) -> Self {
        Gateway::new(Arc::new(backend), GatewayConfig::default())
    }

    fn cache_key(req: &CompletionRequest) -> String {
        let mut hasher = Sha256::new();
        hasher.update(req.system_text.as_bytes());
        hasher.update([0]);
        hasher.update(req.user_text.as_bytes());
        hasher.update([0]);
        hasher.update(req.params.temperature.to_le_bytes());
        hasher.update(req.params.max_output_tokens.to_le_bytes());
        hex(&hasher.finalize())
    }

    /// Issues one completion, recording a trace entry. Budget is enforced
    /// before contacting the backend.
    pub fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        let key = Self::cache_key(req);
        {
            let mut state = self.state.lock().unwrap();
            if let Some(cap) = self.config.budget_usd {
                if state.spent_usd > cap {
                    return Err(GatewayError::Budget {
                        spent: state.spent_usd,
                        cap,
                    });
                }
            }
            if self.config.cache_enabled {
                if let Some(text) = state.cache.get(&key).cloned() {
                    let request_tokens =
                        estimate_tokens(&req.system_text) + estimate_tokens(&req.user_text);
                    let response_tokens = estimate_tokens(&text);
                    state.trace.push(TimedTraceRecord {
                        record: TraceRecord {
                            stage: req.stage_label.clone(),
                            prompt_hash: key.clone(),
                            request_tokens,
                            response_tokens,
                            cost_usd: 0.0,
                            cached: true,
                        },
                        wall_time_ms: 0,
                    });
                    return Ok(text);
                }
            }
        }

        let started = Instant::now();
        let response = self.backend.complete(req)?;
        let wall_time_ms = started.elapsed().as_millis() as u64;

        let (request_tokens, response_tokens) = match response.usage {
            Some(u) => (u.request_tokens, u.response_tokens),
            None => (
                estimate_tokens(&req.system_text) + estimate_tokens(&req.user_text),
                estimate_tokens(&response.text),
            ),
        };
        let cost_usd = request_tokens as f64 * self.config.pricing.usd_per_request_token
            + response_tokens as f64 * self.config.pricing.usd_per_response_token;

        let mut state = self.state.lock().unwrap();
        state.spent_usd += cost_usd;
        if self.config.cache_enabled {
            state.cache.insert(key.clone(), response.text.clone());
        }
        state.trace.push(TimedTraceRecord {
            record: TraceRecord {
                stage: req.stage_label.clone(),
                prompt_hash: key,
                request_tokens,
                response_tokens,
                cost_usd,
                cached: false,
            },
            wall_time_ms,
        });
        Ok(response.text)
    }

    /// Issues a completion that must match `shape`, re-prompting with a
    /// correction note up to `max_retries` times. The repair pipeline runs
    /// on every response before parsing. Transport and budget errors abort
    /// immediately; only parse failures are retried.
    pub fn complete_structured(
        &self,
        req: &CompletionRequest,
        shape: &Shape,
        max_retries: u32,
    ) -> Result<StructuredValue, GatewayError> {
        let mut attempts: Vec<String> = Vec::new();
        for attempt in 0..=max_retries {
            let attempt_req = if attempt == 0 {
                req.clone()
            } else {
                let mut corrected = req.clone();
                corrected.user_text = format!(
                    "{}\n\nYour previous reply could not be used: it was not {}. \
                     Respond again with only {}.",
                    req.user_text,
                    shape.describe(),
                    shape.describe()
                );
                corrected
            };
            let text = self.complete(&attempt_req)?;
            match repair::parse_shaped(&text, shape) {
                Ok(value) => return Ok(value),
                Err(_reason) => attempts.push(text),
            }
        }
        Err(GatewayError::Malformed {
            stage: req.stage_label.clone(),
            attempts,
        })
    }

    /// Default retry budget for structured calls.
    pub const DEFAULT_MAX_RETRIES: u32 = 2;

    /// Full trace including wall times, for the side-channel trace file.
    pub fn timed_trace(&self) -> Vec<TimedTraceRecord> {
        self.state.lock().unwrap().trace.clone()
    }

    /// Deterministic trace records for embedding into a transcript.
    pub fn transcript_trace(&self) -> Vec<TraceRecord> {
        self.state
            .lock()
            .unwrap()
            .trace
            .iter()
            .map(|t| t.record.clone())
            .collect()
    }

    /// Total estimated spend so far.
    pub fn spent_usd(&self) -> f64 {
        self.state.lock().unwrap().spent_usd
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
