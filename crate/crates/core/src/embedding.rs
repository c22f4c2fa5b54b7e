//! Inverted BERTScore: greedy cosine matching over contextual token
//! embeddings, reported as a contrast score.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::backend::{Embedding, EmbeddingBackend};
use crate::error::{Error, Result};
use crate::model::{MetricKind, MetricReport, Summary};

/// Tokens paired with L2-normalized vectors of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl TokenEmbeddingSequence {
    pub fn new(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::DegenerateInput("empty token sequence".into()));
        }
        if tokens.len() != vectors.len() {
            return Err(Error::LengthMismatch {
                left: tokens.len(),
                right: vectors.len(),
            });
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::DegenerateInput("zero-dimensional embedding".into()));
        }
        let mut normalized = Vec::with_capacity(vectors.len());
        for (token, v) in tokens.iter().zip(vectors) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: v.len() });
            }
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::DegenerateInput(format!("token {token:?} has a zero or non-finite vector")));
            }
            normalized.push(v.into_iter().map(|x| x / norm).collect());
        }
        Ok(Self {
            tokens,
            vectors: normalized,
        })
    }

    pub fn from_embedding(e: Embedding) -> Result<Self> {
        Self::new(e.tokens, e.vectors)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyMatch {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted mean over `from` tokens of their best cosine against `to`.
fn best_match_mean(
    from: &TokenEmbeddingSequence,
    to: &TokenEmbeddingSequence,
    idf: Option<&BTreeMap<String, f64>>,
) -> f64 {
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for (token, v) in from.tokens.iter().zip(&from.vectors) {
        let best = to
            .vectors
            .iter()
            .map(|w| dot(v, w))
            .fold(f64::NEG_INFINITY, f64::max);
        let weight = idf.map_or(1.0, |m| m.get(token).copied().unwrap_or(1.0));
        total += weight * best;
        weight_sum += weight;
    }
    if weight_sum == 0.0 {
        0.0
    } else {
        total / weight_sum
    }
}

fn greedy_match_weighted(
    x: &TokenEmbeddingSequence,
    y: &TokenEmbeddingSequence,
    idf: Option<&BTreeMap<String, f64>>,
) -> Result<GreedyMatch> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let recall = best_match_mean(x, y, idf);
    let precision = best_match_mean(y, x, idf);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(GreedyMatch { precision, recall, f1 })
}

/// Greedy-matching precision, recall and F1. Recall averages over `x`,
/// precision over `y`.
pub fn greedy_match(x: &TokenEmbeddingSequence, y: &TokenEmbeddingSequence) -> Result<GreedyMatch> {
    greedy_match_weighted(x, y, None)
}

pub fn greedy_match_f1(x: &TokenEmbeddingSequence, y: &TokenEmbeddingSequence) -> Result<f64> {
    greedy_match(x, y).map(|m| m.f1)
}

/// Inverse document frequencies `ln((M + 1) / (df + 1))` over token lists.
pub fn idf_weights<'a>(documents: impl IntoIterator<Item = &'a [String]>) -> BTreeMap<String, f64> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut m = 0usize;
    for doc in documents {
        m += 1;
        let unique: BTreeSet<&String> = doc.iter().collect();
        for t in unique {
            *df.entry(t.clone()).or_default() += 1;
        }
    }
    df.into_iter()
        .map(|(t, n)| (t, libm::log((m as f64 + 1.0) / (n as f64 + 1.0))))
        .collect()
}

/// Optional BERTScore refinements. Both are off by default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BsOptions {
    pub idf: Option<BTreeMap<String, f64>>,
    /// Baseline F1 for `(f1 - b) / (1 - b)` rescaling.
    pub baseline_f1: Option<f64>,
}

fn embed_summary(summary: &Summary, backend: &dyn EmbeddingBackend) -> Result<TokenEmbeddingSequence> {
    let text = summary.text();
    if text.trim().is_empty() {
        return Err(Error::DegenerateInput(format!(
            "summary {}/{} has no text",
            summary.entity_pair_id, summary.side
        )));
    }
    let emb = backend.embed(&text).map_err(Error::Embedding)?;
    TokenEmbeddingSequence::from_embedding(emb)
}

pub fn bs_inverse(left: &Summary, right: &Summary, backend: &dyn EmbeddingBackend) -> Result<MetricReport> {
    bs_inverse_with(left, right, backend, &BsOptions::default())
}

/// `100 * (1 - F1)` with F1 from greedy matching of the two summaries.
pub fn bs_inverse_with(
    left: &Summary,
    right: &Summary,
    backend: &dyn EmbeddingBackend,
    options: &BsOptions,
) -> Result<MetricReport> {
    let x = embed_summary(left, backend)?;
    let y = embed_summary(right, backend)?;
    let m = greedy_match_weighted(&x, &y, options.idf.as_ref())?;
    let mut f1 = m.f1;
    if let Some(b) = options.baseline_f1 {
        if b < 1.0 {
            f1 = (f1 - b) / (1.0 - b);
        }
    }
    let score = (100.0 * (1.0 - f1)).clamp(0.0, 100.0);
    Ok(MetricReport::new(MetricKind::BsInv, score)
        .with_meta("backend", backend.identity())
        .with_meta("precision", format!("{:.6}", m.precision))
        .with_meta("recall", format!("{:.6}", m.recall))
        .with_meta("f1", format!("{:.6}", m.f1))
        .with_meta("idf", if options.idf.is_some() { "on" } else { "off" }.to_string())
        .with_meta(
            "baseline_rescale",
            options.baseline_f1.map_or("off".to_string(), |b| format!("{b}")),
        ))
}
