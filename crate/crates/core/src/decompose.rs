//! Single-claim decomposition of summary sentences through a chat model.
//!
//! Every sentence is sent as a fresh conversation: one backend call with the
//! system prompt and that sentence only. The completion is parsed back into
//! sentences line by line, then by terminal punctuation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::ChatCompletionBackend;
use crate::error::{Error, Result};
use crate::model::{Sentence, Summary};
use crate::text::{nfc, split_sentences};

/// Few-shot system prompt, version 1.
pub const DECOMPOSE_PROMPT_V1: &str = include_str!("../assets/decompose_prompt_v1.txt");
pub const DEFAULT_MAX_TOKENS: u32 = 256;
pub const DEFAULT_TEMPERATURE: f64 = 0.5;
/// How completions are turned back into sentences; recorded in reports.
pub const PARSE_SCHEME: &str = "lines+terminal-punct/1";

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest.iter() {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRequest {
    pub sentence: Sentence,
    pub prompt_template: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl DecompositionRequest {
    pub fn new(sentence: Sentence) -> Self {
        Self {
            sentence,
            prompt_template: DECOMPOSE_PROMPT_V1.to_string(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Prompt and sampling parameters shared by every request of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionConfig {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            prompt: DECOMPOSE_PROMPT_V1.to_string(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl DecompositionConfig {
    pub fn prompt_hash(&self) -> String {
        sha256_hex(&self.prompt)
    }

    fn request(&self, sentence: &Sentence) -> DecompositionRequest {
        DecompositionRequest {
            sentence: sentence.clone(),
            prompt_template: self.prompt.clone(),
            max_tokens: self.max_tokens,
            temperature: self.temperature,
        }
    }
}

/// A summary rewritten as single-claim sentences. Each derived sentence
/// points back at the origin sentence it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposedSummary {
    origin: Summary,
    sentences: Vec<Sentence>,
}

impl DecomposedSummary {
    /// Checks that provenance is total and covers every origin sentence.
    pub fn from_parts(origin: Summary, sentences: Vec<Sentence>) -> Result<Self> {
        let origin_ids: BTreeSet<&str> = origin.sentences.iter().map(|s| s.id.as_str()).collect();
        let mut covered = BTreeSet::new();
        let mut problems = Vec::new();
        let mut ids = BTreeSet::new();
        for s in &sentences {
            if !ids.insert(s.id.as_str()) {
                problems.push(format!("duplicated sentence id {:?}", s.id));
            }
            match s.source_id.as_deref() {
                Some(src) if origin_ids.contains(src) => {
                    covered.insert(src);
                }
                Some(src) => problems.push(format!("{:?} references unknown source {src:?}", s.id)),
                None => problems.push(format!("{:?} has no source_id", s.id)),
            }
        }
        for id in &origin_ids {
            if !covered.contains(id) {
                problems.push(format!("origin sentence {id:?} has no derived sentence"));
            }
        }
        if problems.is_empty() {
            Ok(Self { origin, sentences })
        } else {
            Err(Error::InvalidSummary(problems))
        }
    }

    /// Treats every origin sentence as already single-claim.
    pub fn identity(origin: &Summary) -> Self {
        let sentences = origin
            .sentences
            .iter()
            .map(|s| Sentence::derived(format!("{}.0", s.id), &s.text, s.id.clone()))
            .collect();
        Self {
            origin: origin.clone(),
            sentences,
        }
    }

    pub fn origin(&self) -> &Summary {
        &self.origin
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// The decomposed sentences as a summary with the origin's side and ids.
    pub fn to_summary(&self) -> Summary {
        Summary::new(
            self.origin.side,
            self.origin.entity_pair_id.clone(),
            self.origin.annotator_id.clone(),
            self.sentences.clone(),
        )
    }
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    for bullet in ["- ", "* ", "\u{2022} "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim_start();
        }
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return rest.trim_start();
        }
    }
    line
}

/// Splits a completion into claim texts.
pub fn parse_completion(completion: &str) -> Vec<String> {
    completion
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .flat_map(split_sentences)
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .map(String::from)
        .collect()
}

fn derive_sentences(source: &Sentence, claims: &[String]) -> Vec<Sentence> {
    claims
        .iter()
        .enumerate()
        .map(|(k, text)| Sentence::derived(format!("{}.{k}", source.id), text, source.id.clone()))
        .collect()
}

fn request_claims(req: &DecompositionRequest, client: &dyn ChatCompletionBackend) -> Result<Vec<String>> {
    req.validate()?;
    let completion = client
        .complete(
            &req.prompt_template,
            req.sentence.text.trim(),
            req.max_tokens,
            req.temperature,
        )
        .map_err(|source| Error::Backend {
            sentence_id: req.sentence.id.clone(),
            source,
        })?;
    let claims = parse_completion(&completion);
    if claims.is_empty() {
        return Err(Error::MalformedResponse {
            sentence_id: req.sentence.id.clone(),
            reason: format!("no sentences in completion {completion:?}"),
        });
    }
    Ok(claims)
}

/// Decomposes one sentence with a single, history-free backend call.
pub fn decompose_sentence(
    req: &DecompositionRequest,
    client: &dyn ChatCompletionBackend,
) -> Result<Vec<Sentence>> {
    let claims = request_claims(req, client)?;
    Ok(derive_sentences(&req.sentence, &claims))
}

/// Decomposes every sentence of `summary` in order. Sentences with equal
/// normalized text are sent to the backend once.
pub fn decompose_summary(
    summary: &Summary,
    client: &dyn ChatCompletionBackend,
    config: &DecompositionConfig,
) -> Result<DecomposedSummary> {
    summary.ensure_valid()?;
    let mut seen: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut sentences = Vec::new();
    for sentence in &summary.sentences {
        let key = nfc(sentence.text.trim());
        let claims = match seen.get(&key) {
            Some(claims) => claims.clone(),
            None => {
                let claims = request_claims(&config.request(sentence), client)?;
                seen.insert(key, claims.clone());
                claims
            }
        };
        sentences.extend(derive_sentences(sentence, &claims));
    }
    DecomposedSummary::from_parts(summary.clone(), sentences)
}
