//! Append-only JSONL response cache and the read-through backend wrappers.
//!
//! A record is keyed by the SHA-256 of the backend identity and the
//! canonical request text. Loading verifies every line; a damaged file is
//! an error, never a silent miss.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use contrast_core::decompose::sha256_hex;
use contrast_core::text::nfc;
use contrast_core::{BackendError, ChatCompletionBackend, Embedding, EmbeddingBackend, NliBackend, NliLabel};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const CACHE_FILE: &str = "responses.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key_hash: String,
    pub model: String,
    pub request_text: String,
    pub response_text: String,
    /// Seconds since the Unix epoch when the record was written.
    pub timestamp: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt cache record: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

pub fn cache_key(model: &str, request_text: &str) -> String {
    sha256_hex(&format!("{model}\u{0}{request_text}"))
}

pub struct ResponseCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<File>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl std::fmt::Debug for ResponseCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResponseCache").field("path", &self.path).finish()
    }
}

impl ResponseCache {
    /// Opens (creating if needed) `dir/responses.jsonl`.
    pub fn open_dir(dir: &Path) -> Result<Self, CacheError> {
        fs::create_dir_all(dir).map_err(|source| CacheError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Self::open(&dir.join(CACHE_FILE))
    }

    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |reason: String| CacheError::Corrupt {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason,
                };
                let record: CacheRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if record.key_hash != cache_key(&record.model, &record.request_text) {
                    return Err(corrupt("key_hash does not match model and request".into()));
                }
                // The first answer recorded for a key is the one that stands.
                entries.entry(record.key_hash).or_insert(record.response_text);
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
            key_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, request_text: &str) -> Option<String> {
        let key = cache_key(model, request_text);
        self.entries.read().expect("cache lock poisoned").get(&key).cloned()
    }

    /// Returns the stored response, or calls `fetch` and stores its result.
    /// Concurrent callers with the same key wait for one fetch.
    pub fn get_or_fetch(
        &self,
        model: &str,
        request_text: &str,
        fetch: impl FnOnce() -> Result<String, BackendError>,
    ) -> Result<String, BackendError> {
        let key = cache_key(model, request_text);
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let slot = self
            .key_locks
            .lock()
            .expect("cache lock poisoned")
            .entry(key.clone())
            .or_default()
            .clone();
        let _guard = slot.lock().expect("cache lock poisoned");
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let response = fetch()?;
        let record = CacheRecord {
            key_hash: key.clone(),
            model: model.to_string(),
            request_text: request_text.to_string(),
            response_text: response.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut line = serde_json::to_string(&record).map_err(|e| BackendError::Cache(e.to_string()))?;
        line.push('\n');
        {
            let mut w = self.writer.lock().expect("cache lock poisoned");
            w.write_all(line.as_bytes())
                .and_then(|()| w.flush())
                .map_err(|e| BackendError::Cache(format!("{}: {e}", self.path.display())))?;
        }
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(key, response.clone());
        Ok(response)
    }
}

pub struct CachedNli<B> {
    inner: B,
    cache: Arc<ResponseCache>,
}

impl<B: NliBackend> CachedNli<B> {
    pub fn new(inner: B, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

impl<B: NliBackend> NliBackend for CachedNli<B> {
    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliLabel, BackendError> {
        let request = json!({ "premise": nfc(premise), "hypothesis": nfc(hypothesis) }).to_string();
        let text = self.cache.get_or_fetch(self.inner.identity(), &request, || {
            self.inner.predict(premise, hypothesis).map(|l| l.as_str().to_string())
        })?;
        NliLabel::parse(&text).ok_or_else(|| BackendError::Cache(format!("cached label {text:?} is not an NLI label")))
    }

    fn identity(&self) -> &str {
        self.inner.identity()
    }
}

pub struct CachedEmbedding<B> {
    inner: B,
    cache: Arc<ResponseCache>,
}

impl<B: EmbeddingBackend> CachedEmbedding<B> {
    pub fn new(inner: B, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

impl<B: EmbeddingBackend> EmbeddingBackend for CachedEmbedding<B> {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let request = json!({ "text": nfc(text) }).to_string();
        let stored = self.cache.get_or_fetch(self.inner.identity(), &request, || {
            let e = self.inner.embed(text)?;
            serde_json::to_string(&e).map_err(|e| BackendError::Cache(e.to_string()))
        })?;
        serde_json::from_str(&stored).map_err(|e| BackendError::Cache(format!("cached embedding: {e}")))
    }

    fn identity(&self) -> &str {
        self.inner.identity()
    }
}

pub struct CachedChat<B> {
    inner: B,
    cache: Arc<ResponseCache>,
}

impl<B: ChatCompletionBackend> CachedChat<B> {
    pub fn new(inner: B, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

impl<B: ChatCompletionBackend> ChatCompletionBackend for CachedChat<B> {
    fn complete(
        &self,
        system_prompt: &str,
        user_text: &str,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<String, BackendError> {
        let request = json!({
            "system": nfc(system_prompt),
            "user": nfc(user_text.trim()),
            "max_tokens": max_tokens,
            "temperature": temperature,
        })
        .to_string();
        self.cache.get_or_fetch(self.inner.identity(), &request, || {
            self.inner.complete(system_prompt, user_text, max_tokens, temperature)
        })
    }

    fn identity(&self) -> &str {
        self.inner.identity()
    }
}
