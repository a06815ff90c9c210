//! Content-addressed response cache: one JSON file per prompt hash under
//! `cache/<first two hex chars>/<hash>.json`.

use std::path::{Path, PathBuf};

use rand::Rng;

use super::{prompt_hash, Client, GenerationParams, InferenceError, ModelResponse};
use crate::prompt::RenderedPrompt;

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("00");
        self.root.join(shard).join(format!("{key}.json"))
    }

    /// Cached response for a key. A corrupt entry is treated as a miss
    /// with a warning.
    pub fn get(&self, key: &str) -> Option<ModelResponse> {
        let path = self.entry_path(key);
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(response) => Some(response),
            Err(e) => {
                log::warn!("cache entry {} is corrupt ({e}); regenerating", path.display());
                None
            }
        }
    }

    /// Atomic insert: write to a temp file in the same directory, then
    /// rename over the final path. Readers never observe partial writes.
    pub fn put(&self, key: &str, response: &ModelResponse) -> std::io::Result<()> {
        let path = self.entry_path(key);
        let dir = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{key}.{:08x}.tmp",
            rand::thread_rng().gen::<u32>()
        ));
        std::fs::write(&tmp, serde_json::to_vec(response)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// Completes through the cache: a hit short-circuits the network, a miss
/// calls the endpoint and persists the entry. Returns the response plus
/// whether it was served from cache.
pub async fn cached_complete(
    client: &Client,
    cache: &ResponseCache,
    prompt: &RenderedPrompt,
    params: &GenerationParams,
) -> Result<(ModelResponse, bool), InferenceError> {
    let key = prompt_hash(
        &client.endpoint().model,
        prompt.template,
        prompt.shots,
        params,
        &prompt.text,
    );
    if let Some(mut hit) = cache.get(&key) {
        // identical prompts can be shared across items; the text is
        // content-addressed, the id belongs to the caller
        hit.item_id = prompt.item_id.clone();
        return Ok((hit, true));
    }
    let response = client.complete(prompt, params).await?;
    cache.put(&key, &response)?;
    Ok((response, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(text: &str) -> ModelResponse {
        ModelResponse {
            item_id: "item-1".to_string(),
            text: text.to_string(),
            finish_reason: "stop".to_string(),
            latency_ms: 3,
            prompt_hash: "ab".repeat(32),
            created_at: "2024-01-01T00:00:00Z".to_string(),
            retry_count: 0,
        }
    }

    #[test]
    fn put_then_get_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let key = "ab".repeat(32);
        cache.put(&key, &response("hello")).unwrap();
        let got = cache.get(&key).unwrap();
        assert_eq!(got.text, "hello");
        assert!(cache.entry_path(&key).starts_with(dir.path().join("ab")));
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let key = "cd".repeat(32);
        let path = cache.entry_path(&key);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, b"{truncated").unwrap();
        assert!(cache.get(&key).is_none());
        // a fresh put repairs the entry
        cache.put(&key, &response("fixed")).unwrap();
        assert_eq!(cache.get(&key).unwrap().text, "fixed");
    }

    #[test]
    fn missing_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        assert!(cache.get(&"ef".repeat(32)).is_none());
    }
}
