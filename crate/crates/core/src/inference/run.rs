//! Bounded-concurrency evaluation runs with cache-based resumability.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    cached_complete, ApiFlavor, Client, GenerationParams, InferenceError, ModelResponse,
    ResponseCache, ResponseRecord,
};
use crate::ingest::Language;
use crate::metrics::ExtractionPolicy;
use crate::prompt::{RenderedPrompt, TemplateKind};

/// Everything needed to reproduce or rescore a run, persisted as
/// `run.json` beside the results. Credentials are referenced by
/// environment-variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub model_label: String,
    pub benchmark: String,
    pub language: Language,
    pub dataset_paths: Vec<String>,
    pub dataset_digest: String,
    pub template: TemplateKind,
    pub shots: usize,
    pub extraction: ExtractionPolicy,
    pub params: GenerationParams,
    pub endpoint_base_url: String,
    pub endpoint_model: String,
    pub api_flavor: ApiFlavor,
    pub api_key_env: Option<String>,
    pub endpoint_notes: Option<String>,
    pub record_count: usize,
    pub created_at: String,
    pub harness_version: String,
    pub status: String,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{failed} of {total} requests failed ({skipped} skipped after {threshold} consecutive failures); first error: {first_error}")]
    Aborted {
        total: usize,
        failed: usize,
        skipped: usize,
        threshold: u32,
        first_error: String,
        completed: Vec<ModelResponse>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    /// One response per prompt, sorted by item id.
    pub responses: Vec<ModelResponse>,
    pub cache_hits: usize,
}

/// Runs every prompt through the cache-backed client with at most
/// `max_in_flight` requests outstanding. Each item gets exactly one
/// response; after `failure_threshold` consecutive failures no new
/// requests are issued and the run aborts, reporting what completed.
pub async fn run_eval(
    prompts: &[RenderedPrompt],
    params: &GenerationParams,
    client: &Client,
    cache: &ResponseCache,
) -> Result<RunOutcome, RunError> {
    let threshold = client.endpoint().failure_threshold.max(1);
    let max_in_flight = client.endpoint().max_in_flight.max(1);
    let consecutive = AtomicU32::new(0);
    let tripped = AtomicBool::new(false);

    enum ItemResult {
        Done(ModelResponse, bool),
        Failed(String, InferenceError),
        Skipped,
    }

    let results: Vec<ItemResult> = stream::iter(prompts.iter().map(|prompt| {
        let consecutive = &consecutive;
        let tripped = &tripped;
        async move {
            if tripped.load(Ordering::SeqCst) {
                return ItemResult::Skipped;
            }
            match cached_complete(client, cache, prompt, params).await {
                Ok((response, hit)) => {
                    consecutive.store(0, Ordering::SeqCst);
                    ItemResult::Done(response, hit)
                }
                Err(e) => {
                    let n = consecutive.fetch_add(1, Ordering::SeqCst) + 1;
                    if n >= threshold {
                        tripped.store(true, Ordering::SeqCst);
                    }
                    ItemResult::Failed(prompt.item_id.clone(), e)
                }
            }
        }
    }))
    .buffer_unordered(max_in_flight)
    .collect()
    .await;

    let mut responses = Vec::new();
    let mut cache_hits = 0;
    let mut failures: Vec<(String, String)> = Vec::new();
    let mut skipped = 0;
    for result in results {
        match result {
            ItemResult::Done(response, hit) => {
                if hit {
                    cache_hits += 1;
                }
                responses.push(response);
            }
            ItemResult::Failed(id, e) => failures.push((id, e.to_string())),
            ItemResult::Skipped => skipped += 1,
        }
    }
    responses.sort_by(|a, b| a.item_id.cmp(&b.item_id));

    if failures.is_empty() && skipped == 0 {
        Ok(RunOutcome {
            responses,
            cache_hits,
        })
    } else {
        failures.sort();
        Err(RunError::Aborted {
            total: prompts.len(),
            failed: failures.len(),
            skipped,
            threshold,
            first_error: failures
                .first()
                .map(|(id, e)| format!("{id}: {e}"))
                .unwrap_or_default(),
            completed: responses,
        })
    }
}

/// Writes `responses.jsonl`: one deterministic [`ResponseRecord`] per line,
/// sorted by item id.
pub fn write_responses(dir: &Path, responses: &[ModelResponse]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = String::new();
    for response in responses {
        let record = ResponseRecord::from(response);
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(dir.join("responses.jsonl"), out)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        std::fs::write(dir.join("run.json"), body)
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(dir.join("run.json"))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Reads a `responses.jsonl` file back.
pub fn read_responses(path: &Path) -> std::io::Result<Vec<ResponseRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        out.push(
            serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
        );
    }
    Ok(out)
}
