//! Recorded or rule-based backends loaded from a fixture directory.
//!
//! Recognised files, all optional:
//!
//! * `nli_rules.json`: a [`StubNli`] rule table;
//! * `chat.json`: a [`FixtureChat`] response table;
//! * `embed.json`: either `{"hash_dim": n}` or a [`FixtureEmbedding`] table.

use std::fs;
use std::path::{Path, PathBuf};

use contrast_core::{BackendError, Embedding, EmbeddingBackend, FixtureChat, FixtureEmbedding, HashEmbedding, StubNli};
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub const NLI_FILE: &str = "nli_rules.json";
pub const CHAT_FILE: &str = "chat.json";
pub const EMBED_FILE: &str = "embed.json";

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("fixture directory {0} does not exist")]
    MissingDir(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum EmbedSpec {
    Hash { hash_dim: usize },
    Table(FixtureEmbedding),
}

/// Embedding fixture: pseudo-random per-token vectors or a recorded table.
#[derive(Debug, Clone)]
pub enum EmbedFixture {
    Hash(HashEmbedding),
    Table(FixtureEmbedding),
}

impl EmbeddingBackend for EmbedFixture {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        match self {
            EmbedFixture::Hash(h) => h.embed(text),
            EmbedFixture::Table(t) => t.embed(text),
        }
    }

    fn identity(&self) -> &str {
        match self {
            EmbedFixture::Hash(h) => h.identity(),
            EmbedFixture::Table(t) => t.identity(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSet {
    pub nli: Option<StubNli>,
    pub chat: Option<FixtureChat>,
    pub embed: Option<EmbedFixture>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, FixtureError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map(Some).map_err(|e| FixtureError::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_fixtures(dir: &Path) -> Result<FixtureSet, FixtureError> {
    if !dir.is_dir() {
        return Err(FixtureError::MissingDir(dir.to_path_buf()));
    }
    let embed = match read_json::<EmbedSpec>(&dir.join(EMBED_FILE))? {
        Some(EmbedSpec::Hash { hash_dim: 0 }) => {
            return Err(FixtureError::Parse {
                path: dir.join(EMBED_FILE),
                reason: "hash_dim must be positive".into(),
            })
        }
        Some(EmbedSpec::Hash { hash_dim }) => Some(EmbedFixture::Hash(HashEmbedding::new(hash_dim))),
        Some(EmbedSpec::Table(t)) => Some(EmbedFixture::Table(FixtureEmbedding {
            identity: t.identity,
            ..FixtureEmbedding::new(t.table)
        })),
        None => None,
    };
    Ok(FixtureSet {
        nli: read_json(&dir.join(NLI_FILE))?,
        chat: read_json::<FixtureChat>(&dir.join(CHAT_FILE))?.map(|c| {
            let FixtureChat {
                responses,
                echo_missing,
                identity,
            } = c;
            FixtureChat {
                echo_missing,
                identity,
                ..FixtureChat::new(responses)
            }
        }),
        embed,
    })
}
