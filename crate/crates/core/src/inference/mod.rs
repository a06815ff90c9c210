//! Driving an OpenAI-compatible text-generation endpoint deterministically:
//! HTTP client with retries, a content-addressed response cache, and a
//! bounded-concurrency orchestrator with resumability.

mod cache;
mod client;
mod run;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cached_complete, ResponseCache};
pub use client::Client;
pub use run::{read_responses, run_eval, write_responses, RunError, RunManifest, RunOutcome};

use crate::prompt::TemplateKind;

/// Generation hyperparameters. The default profile is deterministic:
/// temperature 0, no sampling, a single beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
    /// Beam count of the deterministic profile. The OpenAI wire format has
    /// no beam parameter; the value is recorded in run manifests so the
    /// generation setup stays disclosed.
    pub beams: u32,
    /// Overrides the prompt's stop sequences when non-empty.
    pub stop_sequences: Vec<String>,
    pub seed: Option<u64>,
    pub repetition_penalty: Option<f64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_new_tokens: 1024,
            temperature: 0.0,
            beams: 1,
            stop_sequences: Vec::new(),
            seed: None,
            repetition_penalty: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiFlavor {
    /// Raw prompt in, text out (`/v1/completions`).
    #[default]
    Completions,
    /// The prompt wrapped as a single user message (`/v1/chat/completions`).
    Chat,
}

impl std::str::FromStr for ApiFlavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "completions" => Ok(ApiFlavor::Completions),
            "chat" => Ok(ApiFlavor::Chat),
            other => Err(format!(
                "unknown api flavor {other:?}, expected \"completions\" or \"chat\""
            )),
        }
    }
}

/// Where and how to reach the generation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the credential; the value
    /// itself is never stored anywhere.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub api_flavor: ApiFlavor,
    /// Free-text disclosure recorded in the run manifest (for example the
    /// endpoint's quantization setting).
    pub endpoint_notes: Option<String>,
    /// Consecutive failures tolerated before a run aborts.
    pub failure_threshold: u32,
    /// First retry delay; doubles per attempt, with jitter.
    pub backoff_base_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".to_string(),
            model: String::new(),
            api_key_env: None,
            timeout_secs: 120,
            max_retries: 3,
            max_in_flight: 4,
            api_flavor: ApiFlavor::Completions,
            endpoint_notes: None,
            failure_threshold: 10,
            backoff_base_ms: 1000,
        }
    }
}

/// One endpoint response with its generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub item_id: String,
    /// Generated text with any stop sequence and trailing whitespace
    /// stripped.
    pub text: String,
    pub finish_reason: String,
    pub latency_ms: u64,
    pub prompt_hash: String,
    pub created_at: String,
    pub retry_count: u32,
}

/// Deterministic projection of a [`ModelResponse`] persisted in results
/// files. Timing metadata stays in the cache entries so that reruns of the
/// same inputs produce byte-identical results files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub item_id: String,
    pub text: String,
    pub finish_reason: String,
    pub prompt_hash: String,
}

impl From<&ModelResponse> for ResponseRecord {
    fn from(r: &ModelResponse) -> Self {
        Self {
            item_id: r.item_id.clone(),
            text: r.text.clone(),
            finish_reason: r.finish_reason.clone(),
            prompt_hash: r.prompt_hash.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("rate limited")]
    RateLimited,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl InferenceError {
    /// Transient failures worth a backoff-and-retry.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            InferenceError::Unreachable(_) | InferenceError::RateLimited | InferenceError::Timeout
        )
    }
}

#[derive(Serialize)]
struct PromptHashKey<'a> {
    model: &'a str,
    template: TemplateKind,
    shots: usize,
    params: &'a GenerationParams,
    prompt: &'a str,
}

/// Content address of one request: a SHA-256 digest over the model id,
/// template kind, shot count, generation parameters, and prompt text.
pub fn prompt_hash(
    model: &str,
    template: TemplateKind,
    shots: usize,
    params: &GenerationParams,
    prompt: &str,
) -> String {
    use sha2::{Digest, Sha256};
    let key = PromptHashKey {
        model,
        template,
        shots,
        params,
        prompt,
    };
    let canonical = serde_json::to_vec(&key).expect("hash key serializes");
    hex::encode(Sha256::digest(canonical))
}

/// Cuts the text at the earliest occurrence of any stop sequence, then
/// strips trailing whitespace. Guarantees that no persisted response text
/// contains a configured stop sequence.
pub fn strip_stop_sequences(text: &str, stops: &[String]) -> String {
    let mut cut = text.len();
    for stop in stops {
        if stop.is_empty() {
            continue;
        }
        if let Some(pos) = text.find(stop.as_str()) {
            cut = cut.min(pos);
        }
    }
    text[..cut].trim_end().to_string()
}
