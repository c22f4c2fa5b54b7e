use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use contrast_core::{
    BackendError, ChatCompletionBackend, Embedding, EmbeddingBackend, NliBackend, NliLabel,
};
use contrast_eval::cache::{cache_key, CacheError, CacheRecord, CACHE_FILE};
use contrast_eval::{CachedChat, CachedEmbedding, CachedNli, ResponseCache};

#[derive(Default)]
struct Counting {
    calls: AtomicUsize,
    fail: bool,
}

impl NliBackend for Counting {
    fn predict(&self, premise: &str, _: &str) -> Result<NliLabel, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(5));
        if self.fail {
            return Err(BackendError::Unavailable("down".into()));
        }
        Ok(if premise.contains("not") { NliLabel::Contradiction } else { NliLabel::Entailment })
    }
    fn identity(&self) -> &str {
        "counting-nli/1"
    }
}

impl ChatCompletionBackend for Counting {
    fn complete(&self, _: &str, user: &str, _: u32, _: f64) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(format!("{user} (reply {})", self.calls.load(Ordering::SeqCst)))
    }
    fn identity(&self) -> &str {
        "counting-chat/1"
    }
}

impl EmbeddingBackend for Counting {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(Embedding {
            tokens: vec![text.to_string()],
            vectors: vec![vec![1.0, 2.0]],
        })
    }
    fn identity(&self) -> &str {
        "counting-embed/1"
    }
}

fn calls(b: &Arc<Counting>) -> usize {
    b.calls.load(Ordering::SeqCst)
}

#[test]
fn identical_calls_reach_upstream_once() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    let inner = Arc::new(Counting::default());
    let nli = CachedNli::new(inner.clone(), cache.clone());
    assert_eq!(nli.predict("a", "b").unwrap(), NliLabel::Entailment);
    assert_eq!(nli.predict("a", "b").unwrap(), NliLabel::Entailment);
    assert_eq!(calls(&inner), 1);
    // Direction matters: the reversed pair is a different request.
    nli.predict("b", "a").unwrap();
    assert_eq!(calls(&inner), 2);
    assert_eq!(cache.len(), 2);
}

#[test]
fn reopened_cache_serves_history_without_upstream() {
    let dir = tempfile::tempdir().unwrap();
    {
        let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
        let chat = CachedChat::new(Arc::new(Counting::default()), cache);
        assert_eq!(chat.complete("sys", "hello", 10, 0.5).unwrap(), "hello (reply 1)");
    }
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    let inner = Arc::new(Counting::default());
    let chat = CachedChat::new(inner.clone(), cache);
    assert_eq!(chat.complete("sys", "hello", 10, 0.5).unwrap(), "hello (reply 1)");
    assert_eq!(calls(&inner), 0);
    // Different sampling parameters are a different request.
    chat.complete("sys", "hello", 10, 0.7).unwrap();
    assert_eq!(calls(&inner), 1);
}

#[test]
fn embeddings_round_trip_through_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    let inner = Arc::new(Counting::default());
    let emb = CachedEmbedding::new(inner.clone(), cache);
    let first = emb.embed("room").unwrap();
    assert_eq!(emb.embed("room").unwrap(), first);
    assert_eq!(calls(&inner), 1);
}

#[test]
fn nfc_equivalent_requests_share_an_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    let inner = Arc::new(Counting::default());
    let nli = CachedNli::new(inner.clone(), cache);
    nli.predict("caf\u{e9}", "x").unwrap();
    nli.predict("cafe\u{301}", "x").unwrap();
    assert_eq!(calls(&inner), 1);
}

#[test]
fn failures_are_not_stored() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    let inner = Arc::new(Counting {
        fail: true,
        ..Default::default()
    });
    let nli = CachedNli::new(inner.clone(), cache.clone());
    assert!(nli.predict("a", "b").is_err());
    assert!(nli.predict("a", "b").is_err());
    assert_eq!(calls(&inner), 2);
    assert!(cache.is_empty());
}

#[test]
fn concurrent_requests_for_one_key_fetch_once() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    let inner = Arc::new(Counting::default());
    let nli = Arc::new(CachedNli::new(inner.clone(), cache));
    thread::scope(|s| {
        for _ in 0..8 {
            let nli = nli.clone();
            s.spawn(move || {
                for k in 0..4 {
                    nli.predict(&format!("p{k}"), "h").unwrap();
                }
            });
        }
    });
    assert_eq!(calls(&inner), 4);
    let lines = fs::read_to_string(dir.path().join(CACHE_FILE)).unwrap();
    assert_eq!(lines.lines().count(), 4);
}

#[test]
fn records_have_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
    CachedNli::new(Counting::default(), cache).predict("a", "b").unwrap();
    let line = fs::read_to_string(dir.path().join(CACHE_FILE)).unwrap();
    let rec: CacheRecord = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(rec.model, "counting-nli/1");
    assert_eq!(rec.response_text, "entailment");
    assert_eq!(rec.key_hash, cache_key(&rec.model, &rec.request_text));
    assert!(rec.timestamp > 0);
}

#[test]
fn corrupt_line_fails_loudly_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    {
        let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
        CachedNli::new(Counting::default(), cache).predict("a", "b").unwrap();
    }
    let path = dir.path().join(CACHE_FILE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"key_hash\": \"trunc\n");
    fs::write(&path, text).unwrap();
    match ResponseCache::open(&path) {
        Err(CacheError::Corrupt { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected corruption error, got {other:?}"),
    }
}

#[test]
fn tampered_record_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    {
        let cache = Arc::new(ResponseCache::open_dir(dir.path()).unwrap());
        CachedNli::new(Counting::default(), cache).predict("a", "b").unwrap();
    }
    let path = dir.path().join(CACHE_FILE);
    let text = fs::read_to_string(&path).unwrap().replace("\\\"a\\\"", "\\\"z\\\"");
    fs::write(&path, text).unwrap();
    let err = ResponseCache::open(&path).unwrap_err();
    assert!(err.to_string().contains(":1:"), "{err}");
}

#[test]
fn cached_non_label_is_an_error_not_a_miss() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(CACHE_FILE);
    let request = r#"{"hypothesis":"b","premise":"a"}"#;
    let rec = CacheRecord {
        key_hash: cache_key("counting-nli/1", request),
        model: "counting-nli/1".into(),
        request_text: request.into(),
        response_text: "perhaps".into(),
        timestamp: 1,
    };
    fs::write(&path, serde_json::to_string(&rec).unwrap() + "\n").unwrap();
    let inner = Arc::new(Counting::default());
    let nli = CachedNli::new(inner.clone(), Arc::new(ResponseCache::open(&path).unwrap()));
    assert!(matches!(nli.predict("a", "b"), Err(BackendError::Cache(_))));
    assert_eq!(calls(&inner), 0);
}
