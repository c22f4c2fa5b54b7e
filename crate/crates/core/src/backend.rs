//! Inference backend interfaces and the deterministic in-memory backends
//! used for hermetic runs.
//!
//! Network implementations and the disk cache live in the std companion
//! crate; everything here is a pure function of its inputs.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;
use crate::model::NliLabel;
use crate::text::{nfc, tokenize};

pub trait NliBackend: Send + Sync {
    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliLabel, BackendError>;
    /// Model name and version; part of every cache key.
    fn identity(&self) -> &str;
}

/// Raw token embeddings as produced by a backend (not yet normalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError>;
    fn identity(&self) -> &str;
}

pub trait ChatCompletionBackend: Send + Sync {
    fn complete(
        &self,
        system_prompt: &str,
        user_text: &str,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<String, BackendError>;
    fn identity(&self) -> &str;
}

macro_rules! forward_impls {
    ($trait:ident { $($body:tt)* }) => {
        impl<T: $trait + ?Sized> $trait for &T { $($body)* }
        impl<T: $trait + ?Sized> $trait for Box<T> { $($body)* }
        impl<T: $trait + ?Sized> $trait for Arc<T> { $($body)* }
    };
}

forward_impls!(NliBackend {
    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliLabel, BackendError> {
        (**self).predict(premise, hypothesis)
    }
    fn identity(&self) -> &str {
        (**self).identity()
    }
});

forward_impls!(EmbeddingBackend {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        (**self).embed(text)
    }
    fn identity(&self) -> &str {
        (**self).identity()
    }
});

forward_impls!(ChatCompletionBackend {
    fn complete(
        &self,
        system_prompt: &str,
        user_text: &str,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<String, BackendError> {
        (**self).complete(system_prompt, user_text, max_tokens, temperature)
    }
    fn identity(&self) -> &str {
        (**self).identity()
    }
});

/// String matcher used by [`StubNliRule`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Any,
    /// Equal after NFC normalization and trimming.
    Exact(String),
    /// Case-insensitive substring.
    Contains(String),
}

impl Matcher {
    pub fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Exact(want) => nfc(want.trim()) == nfc(text.trim()),
            Matcher::Contains(needle) => nfc(text)
                .to_lowercase()
                .contains(&nfc(needle).to_lowercase()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubNliRule {
    pub left: Matcher,
    pub right: Matcher,
    /// Verdict when the premise matches `left` and the hypothesis `right`.
    pub forward: NliLabel,
    /// Verdict when the premise matches `right` and the hypothesis `left`.
    pub backward: NliLabel,
}

impl StubNliRule {
    pub fn exact(left: &str, right: &str, forward: NliLabel, backward: NliLabel) -> Self {
        Self {
            left: Matcher::Exact(left.to_string()),
            right: Matcher::Exact(right.to_string()),
            forward,
            backward,
        }
    }

    pub fn symmetric(left: Matcher, right: Matcher, label: NliLabel) -> Self {
        Self {
            left,
            right,
            forward: label,
            backward: label,
        }
    }
}

/// Rule-table NLI. The first rule matching in either orientation decides;
/// unmatched pairs are neutral.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubNli {
    pub rules: Vec<StubNliRule>,
    /// Identical premise and hypothesis entail each other.
    #[serde(default)]
    pub reflexive_entailment: bool,
    #[serde(default = "default_stub_identity")]
    pub identity: String,
}

fn default_stub_identity() -> String {
    "stub-nli/1".to_string()
}

pub fn stub_nli(rules: Vec<StubNliRule>) -> StubNli {
    StubNli {
        rules,
        reflexive_entailment: false,
        identity: default_stub_identity(),
    }
}

impl StubNli {
    pub fn with_reflexive_entailment(mut self) -> Self {
        self.reflexive_entailment = true;
        self
    }

    pub fn label(&self, premise: &str, hypothesis: &str) -> NliLabel {
        if self.reflexive_entailment && nfc(premise.trim()) == nfc(hypothesis.trim()) {
            return NliLabel::Entailment;
        }
        for rule in &self.rules {
            if rule.left.matches(premise) && rule.right.matches(hypothesis) {
                return rule.forward;
            }
            if rule.left.matches(hypothesis) && rule.right.matches(premise) {
                return rule.backward;
            }
        }
        NliLabel::Neutral
    }
}

impl NliBackend for StubNli {
    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliLabel, BackendError> {
        Ok(self.label(premise, hypothesis))
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}

/// Chat backend that answers with the user text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoChat;

impl ChatCompletionBackend for EchoChat {
    fn complete(&self, _: &str, user_text: &str, _: u32, _: f64) -> Result<String, BackendError> {
        if user_text.trim().is_empty() {
            return Err(BackendError::Protocol("empty completion".to_string()));
        }
        Ok(user_text.to_string())
    }

    fn identity(&self) -> &str {
        "echo-chat/1"
    }
}

/// Recorded completions keyed by user text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureChat {
    pub responses: BTreeMap<String, String>,
    /// Echo the user text when no response is recorded.
    #[serde(default)]
    pub echo_missing: bool,
    #[serde(default = "default_chat_identity")]
    pub identity: String,
}

fn default_chat_identity() -> String {
    "fixture-chat/1".to_string()
}

impl FixtureChat {
    pub fn new(responses: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            responses: responses
                .into_iter()
                .map(|(k, v)| (nfc(k.trim()), v))
                .collect(),
            echo_missing: false,
            identity: default_chat_identity(),
        }
    }
}

impl ChatCompletionBackend for FixtureChat {
    fn complete(&self, _: &str, user_text: &str, _: u32, _: f64) -> Result<String, BackendError> {
        let key = nfc(user_text.trim());
        match self.responses.get(&key) {
            Some(text) => Ok(text.clone()),
            None if self.echo_missing => EchoChat.complete("", user_text, 0, 0.0),
            None => Err(BackendError::MissingFixture(key)),
        }
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}

/// Deterministic pseudo-embeddings: each lowercase token maps to a fixed
/// pseudo-random vector derived from its bytes. Not contextual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashEmbedding {
    dim: usize,
    identity: String,
}

impl HashEmbedding {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            identity: format!("hash-embedding/{dim}"),
        }
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        // FNV-1a seed, splitmix64 stream.
        let mut state = token.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        });
        (0..self.dim)
            .map(|_| {
                state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
                z ^= z >> 31;
                (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }
}

impl EmbeddingBackend for HashEmbedding {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let tokens: Vec<String> = tokenize(text).tokens().to_vec();
        let vectors = tokens.iter().map(|t| self.token_vector(t)).collect();
        Ok(Embedding { tokens, vectors })
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}

/// Recorded embeddings keyed by exact input text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureEmbedding {
    pub table: BTreeMap<String, Embedding>,
    #[serde(default = "default_embedding_identity")]
    pub identity: String,
}

fn default_embedding_identity() -> String {
    "fixture-embedding/1".to_string()
}

impl FixtureEmbedding {
    pub fn new(table: impl IntoIterator<Item = (String, Embedding)>) -> Self {
        Self {
            table: table.into_iter().map(|(k, v)| (nfc(k.trim()), v)).collect(),
            identity: default_embedding_identity(),
        }
    }
}

impl EmbeddingBackend for FixtureEmbedding {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let key = nfc(text.trim());
        self.table
            .get(&key)
            .cloned()
            .ok_or(BackendError::MissingFixture(key))
    }

    fn identity(&self) -> &str {
        &self.identity
    }
}
