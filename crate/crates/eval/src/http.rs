//! Blocking HTTP clients for the NLI, embedding and chat servers.
//!
//! Every request is a JSON `POST`. Transport failures, 429 and 5xx answers
//! are retried with exponential backoff; anything else fails at once.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use contrast_core::{BackendError, ChatCompletionBackend, Embedding, EmbeddingBackend, NliBackend, NliLabel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Environment variable holding the bearer token sent to every server.
pub const TOKEN_ENV: &str = "CONTRAST_EVAL_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, the first one included.
    pub attempts: u32,
    /// Delay before the second attempt; doubled for each later one.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpSettings {
    pub token: Option<String>,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            token: None,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(60),
        }
    }
}

impl HttpSettings {
    /// Default settings with the token taken from [`TOKEN_ENV`].
    pub fn from_env() -> Self {
        Self {
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            ..Self::default()
        }
    }
}

/// Counters shared by the clients of one run.
#[derive(Debug, Default)]
pub struct HttpStats {
    retries: AtomicU64,
    requests: AtomicU64,
    nli_ties: AtomicU64,
}

impl HttpStats {
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    /// NLI answers whose class scores had more than one maximum.
    pub fn nli_ties(&self) -> u64 {
        self.nli_ties.load(Ordering::Relaxed)
    }
}

struct Client {
    url: String,
    agent: ureq::Agent,
    settings: HttpSettings,
    stats: Arc<HttpStats>,
}

impl Client {
    fn new(base: &str, path: &str, settings: HttpSettings, stats: Arc<HttpStats>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .build()
            .into();
        Self {
            url: format!("{}/{path}", base.trim_end_matches('/')),
            agent,
            settings,
            stats,
        }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp, BackendError> {
        let attempts = self.settings.retry.attempts.max(1);
        let mut last = BackendError::Unavailable(format!("{}: no attempt made", self.url));
        for attempt in 0..attempts {
            if attempt > 0 {
                self.stats.retries.fetch_add(1, Ordering::Relaxed);
                thread::sleep(self.settings.retry.base_delay * 2u32.pow(attempt - 1));
            }
            self.stats.requests.fetch_add(1, Ordering::Relaxed);
            let mut req = self.agent.post(&self.url);
            if let Some(token) = &self.settings.token {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    return resp
                        .body_mut()
                        .read_json::<Resp>()
                        .map_err(|e| BackendError::Protocol(format!("{}: {e}", self.url)));
                }
                Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                    last = BackendError::Unavailable(format!("{}: HTTP {code}", self.url));
                }
                Err(ureq::Error::StatusCode(code)) => {
                    return Err(BackendError::Protocol(format!("{}: HTTP {code}", self.url)));
                }
                Err(e) => last = BackendError::Unavailable(format!("{}: {e}", self.url)),
            }
        }
        Err(last)
    }
}

#[derive(Serialize)]
struct NliRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Deserialize)]
struct NliScores {
    entailment: f64,
    neutral: f64,
    contradiction: f64,
}

#[derive(Deserialize)]
struct NliResponse {
    label: String,
    #[serde(default)]
    scores: Option<NliScores>,
}

pub struct HttpNli {
    client: Client,
    identity: String,
}

impl HttpNli {
    pub fn new(endpoint: &str, identity: Option<String>, settings: HttpSettings, stats: Arc<HttpStats>) -> Self {
        Self {
            identity: identity.unwrap_or_else(|| format!("http-nli:{endpoint}")),
            client: Client::new(endpoint, "nli", settings, stats),
        }
    }
}

impl NliBackend for HttpNli {
    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliLabel, BackendError> {
        let resp: NliResponse = self.client.post(&NliRequest { premise, hypothesis })?;
        let label = NliLabel::parse(&resp.label)
            .ok_or_else(|| BackendError::Protocol(format!("unknown NLI label {:?}", resp.label)))?;
        if let Some(s) = resp.scores {
            let top = s.entailment.max(s.neutral).max(s.contradiction);
            let at_top = [s.entailment, s.neutral, s.contradiction]
                .iter()
                .filter(|v| **v == top)
                .count();
            if at_top > 1 {
                self.client.stats.nli_ties.fetch_add(1, Ordering::Relaxed);
            }
        }
        Ok(label)
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

pub struct HttpEmbedding {
    client: Client,
    identity: String,
}

impl HttpEmbedding {
    pub fn new(endpoint: &str, identity: Option<String>, settings: HttpSettings, stats: Arc<HttpStats>) -> Self {
        Self {
            identity: identity.unwrap_or_else(|| format!("http-embed:{endpoint}")),
            client: Client::new(endpoint, "embed", settings, stats),
        }
    }
}

impl EmbeddingBackend for HttpEmbedding {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let e: Embedding = self.client.post(&EmbedRequest { text })?;
        if e.tokens.len() != e.vectors.len() {
            return Err(BackendError::Protocol(format!(
                "{} tokens but {} vectors",
                e.tokens.len(),
                e.vectors.len()
            )));
        }
        Ok(e)
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    system: &'a str,
    user: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    text: String,
}

pub struct HttpChat {
    client: Client,
    identity: String,
}

impl HttpChat {
    pub fn new(endpoint: &str, identity: Option<String>, settings: HttpSettings, stats: Arc<HttpStats>) -> Self {
        Self {
            identity: identity.unwrap_or_else(|| format!("http-chat:{endpoint}")),
            client: Client::new(endpoint, "chat", settings, stats),
        }
    }
}

impl ChatCompletionBackend for HttpChat {
    fn complete(
        &self,
        system_prompt: &str,
        user_text: &str,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<String, BackendError> {
        let resp: ChatResponse = self.client.post(&ChatRequest {
            system: system_prompt,
            user: user_text,
            max_tokens,
            temperature,
        })?;
        Ok(resp.text)
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}
