//! Domain values shared by every metric: sentences, summaries, NLI labels
//! and metric reports.
//!
//! All values are immutable once built. Text is NFC-normalized on the way
//! in so that equality (and cache keys derived from it) is stable.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{nfc, segment_sentences};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        Self {
            id: id.into(),
            text: nfc(text),
            source_id: None,
        }
    }

    pub fn derived(id: impl Into<String>, text: &str, source_id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: nfc(text),
            source_id: Some(source_id.into()),
        }
    }
}

/// Which half of a contrastive summary triple a summary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[serde(alias = "A_minus_B", alias = "a\\b")]
    AMinusB,
    #[serde(alias = "B_minus_A", alias = "b\\a")]
    BMinusA,
    #[serde(alias = "A_common", alias = "common")]
    ACommon,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::AMinusB => "a_minus_b",
            Side::BMinusA => "b_minus_a",
            Side::ACommon => "a_common",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub side: Side,
    pub entity_pair_id: String,
    pub annotator_id: String,
    pub sentences: Vec<Sentence>,
}

impl Summary {
    pub fn new(
        side: Side,
        entity_pair_id: impl Into<String>,
        annotator_id: impl Into<String>,
        sentences: Vec<Sentence>,
    ) -> Self {
        Self {
            side,
            entity_pair_id: entity_pair_id.into(),
            annotator_id: annotator_id.into(),
            sentences,
        }
    }

    /// Segments a paragraph into sentences with positional ids `s0`, `s1`, ...
    pub fn from_text(
        side: Side,
        entity_pair_id: impl Into<String>,
        annotator_id: impl Into<String>,
        text: &str,
    ) -> Self {
        Self::new(side, entity_pair_id, annotator_id, segment_sentences(text))
    }

    /// The summary as a single paragraph.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(s.text.trim());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Fails with every violation when the summary breaks an invariant.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_summary(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSummary(violations))
        }
    }
}

/// Lists every invariant violation of `summary`. An empty list means valid.
pub fn validate_summary(summary: &Summary) -> Vec<String> {
    let mut violations = Vec::new();
    if summary.entity_pair_id.trim().is_empty() {
        violations.push("entity_pair_id: must be set".to_string());
    }
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for (idx, sentence) in summary.sentences.iter().enumerate() {
        if sentence.id.trim().is_empty() {
            violations.push(format!("sentences[{idx}].id: must be non-empty"));
        }
        if sentence.text.trim().is_empty() {
            violations.push(format!(
                "sentences[{idx}].text: sentence {:?} is blank",
                sentence.id
            ));
        }
        if !seen.insert(sentence.id.as_str()) && reported.insert(sentence.id.as_str()) {
            violations.push(format!(
                "sentences.id: duplicated sentence id {:?}",
                sentence.id
            ));
        }
    }
    violations
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [
        NliLabel::Entailment,
        NliLabel::Contradiction,
        NliLabel::Neutral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Contradiction => "contradiction",
            NliLabel::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "ent" => Some(NliLabel::Entailment),
            "contradiction" | "cont" => Some(NliLabel::Contradiction),
            "neutral" | "neut" => Some(NliLabel::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two directional verdicts for one sentence pair and their fused label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonLabel {
    /// Premise is the left sentence.
    pub forward: NliLabel,
    /// Premise is the right sentence.
    pub backward: NliLabel,
    pub fused: NliLabel,
}

impl ComparisonLabel {
    pub fn new(forward: NliLabel, backward: NliLabel) -> Self {
        Self {
            forward,
            backward,
            fused: crate::caspr::fuse_labels(forward, backward),
        }
    }

    /// The same comparison seen from the other summary.
    pub fn swapped(self) -> Self {
        Self::new(self.backward, self.forward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Caspr,
    Ds,
    DsMulti,
    BsInv,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Caspr => "caspr",
            MetricKind::Ds => "ds",
            MetricKind::DsMulti => "ds_multi",
            MetricKind::BsInv => "bs_inv",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            MetricKind::Caspr => "CASPR",
            MetricKind::Ds => "DS",
            MetricKind::DsMulti => "DS_multi",
            MetricKind::BsInv => "BS_inv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "caspr" => Some(MetricKind::Caspr),
            "ds" => Some(MetricKind::Ds),
            "ds_multi" | "ds-multi" => Some(MetricKind::DsMulti),
            "bs_inv" | "bs-inv" | "bsinv" => Some(MetricKind::BsInv),
            _ => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Per-sentence outcome of comparing one sentence against every sentence of
/// the opposing summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceTally {
    pub sentence_id: String,
    pub n_cont: usize,
    pub n_ent: usize,
    pub n_neut: usize,
    pub label_score: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: MetricKind,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sentence: Option<Vec<SentenceTally>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl MetricReport {
    pub(crate) fn new(metric: MetricKind, score: f64) -> Self {
        debug_assert!((0.0..=100.0).contains(&score), "score {score} out of range");
        Self {
            metric,
            // Rounding noise at the boundaries must never leak out of range.
            score: score.clamp(0.0, 100.0),
            per_sentence: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// Checks the report invariants; useful on deserialized reports.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.score) {
            return Err(Error::InvalidParameter(format!(
                "score {} outside [0, 100]",
                self.score
            )));
        }
        let is_caspr = self.metric == MetricKind::Caspr;
        if is_caspr != self.per_sentence.is_some() {
            return Err(Error::InvalidParameter(
                "per_sentence must be present exactly for caspr reports".to_string(),
            ));
        }
        Ok(())
    }
}
