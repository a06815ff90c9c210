//! HTTP transport for OpenAI-compatible completion endpoints.

use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};

use super::{
    prompt_hash, strip_stop_sequences, ApiFlavor, EndpointConfig, GenerationParams,
    InferenceError, ModelResponse,
};
use crate::prompt::RenderedPrompt;

pub struct Client {
    http: reqwest::Client,
    endpoint: EndpointConfig,
    api_key: Option<String>,
}

impl Client {
    /// Builds a client, resolving the credential from the environment
    /// variable named in the endpoint config (if any).
    pub fn new(endpoint: EndpointConfig) -> Result<Self, InferenceError> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| InferenceError::MissingCredential(var.clone()))?,
            ),
            None => None,
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| InferenceError::Unreachable(e.to_string()))?;
        Ok(Self {
            http,
            endpoint,
            api_key,
        })
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    fn url(&self) -> String {
        let base = self.endpoint.base_url.trim_end_matches('/');
        match self.endpoint.api_flavor {
            ApiFlavor::Completions => format!("{base}/v1/completions"),
            ApiFlavor::Chat => format!("{base}/v1/chat/completions"),
        }
    }

    fn request_body(&self, prompt: &RenderedPrompt, params: &GenerationParams) -> Value {
        let stops = effective_stops(prompt, params);
        let mut body = match self.endpoint.api_flavor {
            ApiFlavor::Completions => json!({
                "model": self.endpoint.model,
                "prompt": prompt.text,
                "max_tokens": params.max_new_tokens,
                "temperature": params.temperature,
                "stop": stops,
            }),
            ApiFlavor::Chat => json!({
                "model": self.endpoint.model,
                "messages": [{"role": "user", "content": prompt.text}],
                "max_tokens": params.max_new_tokens,
                "temperature": params.temperature,
                "stop": stops,
            }),
        };
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        if let Some(penalty) = params.repetition_penalty {
            body["repetition_penalty"] = json!(penalty);
        }
        body
    }

    async fn attempt(&self, body: &Value) -> Result<(String, String), InferenceError> {
        let mut request = self.http.post(self.url()).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().await.map_err(|e| {
            if e.is_timeout() {
                InferenceError::Timeout
            } else {
                InferenceError::Unreachable(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().await.unwrap_or_default();
            let detail = detail.chars().take(200).collect::<String>();
            return Err(match status.as_u16() {
                401 | 403 => InferenceError::Unauthorized(detail),
                429 => InferenceError::RateLimited,
                400..=499 => InferenceError::BadRequest(format!("{status}: {detail}")),
                _ => InferenceError::Unreachable(format!("{status}: {detail}")),
            });
        }
        let payload: Value = response
            .json()
            .await
            .map_err(|e| InferenceError::MalformedResponse(e.to_string()))?;
        let choice = payload
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| InferenceError::MalformedResponse("no choices in payload".into()))?;
        let text = match self.endpoint.api_flavor {
            ApiFlavor::Completions => choice.get("text").and_then(Value::as_str),
            ApiFlavor::Chat => choice
                .get("message")
                .and_then(|m| m.get("content"))
                .and_then(Value::as_str),
        }
        .ok_or_else(|| InferenceError::MalformedResponse("no text in first choice".into()))?;
        let finish_reason = choice
            .get("finish_reason")
            .and_then(Value::as_str)
            .unwrap_or("unknown")
            .to_string();
        Ok((text.to_string(), finish_reason))
    }

    /// Sends one prompt, retrying transient failures with exponential
    /// backoff (doubling from the configured base, with jitter).
    pub async fn complete(
        &self,
        prompt: &RenderedPrompt,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        let body = self.request_body(prompt, params);
        let stops = effective_stops(prompt, params);
        let started = Instant::now();
        let mut retry_count = 0;
        let result = loop {
            match self.attempt(&body).await {
                Ok(ok) => break ok,
                Err(e) if e.is_retryable() && retry_count < self.endpoint.max_retries => {
                    let backoff = backoff_delay(self.endpoint.backoff_base_ms, retry_count);
                    log::warn!(
                        "item {}: {e}; retrying in {}ms ({}/{})",
                        prompt.item_id,
                        backoff.as_millis(),
                        retry_count + 1,
                        self.endpoint.max_retries
                    );
                    tokio::time::sleep(backoff).await;
                    retry_count += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let (raw_text, finish_reason) = result;
        Ok(ModelResponse {
            item_id: prompt.item_id.clone(),
            text: strip_stop_sequences(&raw_text, &stops),
            finish_reason,
            latency_ms: started.elapsed().as_millis() as u64,
            prompt_hash: prompt_hash(
                &self.endpoint.model,
                prompt.template,
                prompt.shots,
                params,
                &prompt.text,
            ),
            created_at: chrono::Utc::now().to_rfc3339(),
            retry_count,
        })
    }
}

/// Explicit stop sequences from the params when present, otherwise the
/// prompt's defaults.
pub fn effective_stops(prompt: &RenderedPrompt, params: &GenerationParams) -> Vec<String> {
    if params.stop_sequences.is_empty() {
        prompt.stop_sequences.clone()
    } else {
        params.stop_sequences.clone()
    }
}

fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let exp = base_ms.saturating_mul(1u64 << attempt.min(10));
    let jitter = rand::thread_rng().gen_range(0.5..1.0);
    Duration::from_millis(((exp as f64) * jitter) as u64).min(Duration::from_secs(30))
}
