//! Assembles the backends of a run from its configuration.
//!
//! An endpoint wins over a fixture. Endpoint clients are wrapped in the
//! disk cache when a cache directory is configured.

use std::sync::Arc;

use contrast_core::{ChatCompletionBackend, EmbeddingBackend, MetricKind, NliBackend};

use crate::cache::{CachedChat, CachedEmbedding, CachedNli, ResponseCache};
use crate::config::{ConfigError, RunConfig};
use crate::fixtures::load_fixtures;
use crate::http::{HttpChat, HttpEmbedding, HttpNli, HttpStats};

#[derive(Clone, Default)]
pub struct Backends {
    pub nli: Option<Arc<dyn NliBackend>>,
    pub chat: Option<Arc<dyn ChatCompletionBackend>>,
    pub embed: Option<Arc<dyn EmbeddingBackend>>,
    /// True when chat answers come from a live model rather than a fixture.
    pub chat_is_live: bool,
    pub cache: Option<Arc<ResponseCache>>,
    pub http: Arc<HttpStats>,
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends")
            .field("nli", &self.nli.as_ref().map(|b| b.identity().to_string()))
            .field("chat", &self.chat.as_ref().map(|b| b.identity().to_string()))
            .field("embed", &self.embed.as_ref().map(|b| b.identity().to_string()))
            .finish()
    }
}

impl Backends {
    pub fn from_config(config: &RunConfig) -> Result<Self, ConfigError> {
        let fixtures = match &config.fixtures {
            Some(dir) => load_fixtures(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => Default::default(),
        };
        let cache = match &config.cache_dir {
            Some(dir) => Some(Arc::new(
                ResponseCache::open_dir(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            )),
            None => None,
        };
        let stats = Arc::new(HttpStats::default());
        let settings = config.http_settings();

        let nli: Option<Arc<dyn NliBackend>> = match &config.nli.endpoint {
            Some(url) => {
                let client = HttpNli::new(url, config.nli.model.clone(), settings.clone(), stats.clone());
                Some(match &cache {
                    Some(c) => Arc::new(CachedNli::new(client, c.clone())),
                    None => Arc::new(client),
                })
            }
            None => fixtures.nli.map(|f| Arc::new(f) as Arc<dyn NliBackend>),
        };
        let chat: Option<Arc<dyn ChatCompletionBackend>> = match &config.chat.endpoint {
            Some(url) => {
                let client = HttpChat::new(url, config.chat.model.clone(), settings.clone(), stats.clone());
                Some(match &cache {
                    Some(c) => Arc::new(CachedChat::new(client, c.clone())),
                    None => Arc::new(client),
                })
            }
            None => fixtures.chat.map(|f| Arc::new(f) as Arc<dyn ChatCompletionBackend>),
        };
        let embed: Option<Arc<dyn EmbeddingBackend>> = match &config.embed.endpoint {
            Some(url) => {
                let client = HttpEmbedding::new(url, config.embed.model.clone(), settings, stats.clone());
                Some(match &cache {
                    Some(c) => Arc::new(CachedEmbedding::new(client, c.clone())),
                    None => Arc::new(client),
                })
            }
            None => fixtures.embed.map(|f| Arc::new(f) as Arc<dyn EmbeddingBackend>),
        };
        Ok(Self {
            nli,
            chat,
            embed,
            chat_is_live: config.chat.endpoint.is_some(),
            cache,
            http: stats,
        })
    }

    /// Whether every backend `metric` needs is present.
    pub fn supports(&self, metric: MetricKind) -> bool {
        match metric {
            MetricKind::Ds | MetricKind::DsMulti => true,
            MetricKind::Caspr => self.nli.is_some() && self.chat.is_some(),
            MetricKind::BsInv => self.embed.is_some(),
        }
    }

    /// The metrics to run: the requested ones, each checked for backends,
    /// or every supported metric when none were requested.
    pub fn resolve_metrics(&self, requested: &[MetricKind], default_set: &[MetricKind]) -> Result<Vec<MetricKind>, ConfigError> {
        if requested.is_empty() {
            return Ok(default_set.iter().copied().filter(|m| self.supports(*m)).collect());
        }
        for m in requested {
            if !self.supports(*m) {
                let need = match m {
                    MetricKind::Caspr => "an NLI and a chat backend (--nli-endpoint/--chat-endpoint or --fixtures)",
                    MetricKind::BsInv => "an embedding backend (--embed-endpoint or --fixtures)",
                    _ => unreachable!("lexical metrics need no backend"),
                };
                return Err(ConfigError::Invalid(format!("{} needs {need}", m.as_str())));
            }
        }
        Ok(requested.to_vec())
    }

    pub fn require_chat(&self) -> Result<&dyn ChatCompletionBackend, ConfigError> {
        self.chat
            .as_deref()
            .ok_or_else(|| ConfigError::Invalid("no chat backend: pass --chat-endpoint or --fixtures with chat.json".into()))
    }
}
