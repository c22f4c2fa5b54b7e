//! Experiment datasets built from per-entity-pair reference summaries:
//! reference pairs, paraphrase pairs and negation pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::ChatCompletionBackend;
use crate::decompose::{decompose_summary, DecomposedSummary, DecompositionConfig};
use crate::error::{Error, Result};
use crate::model::{Sentence, Side, Summary};
use crate::text::segment_sentences;

pub const PARAPHRASE_PROMPT: &str = "Paraphrase this";
pub const PARAPHRASE_MAX_TOKENS: u32 = 512;
pub const PARAPHRASE_TEMPERATURE: f64 = 0.5;
/// Connective used to rejoin negated claims of one source sentence.
pub const CONJUNCTION: &str = ", and ";

/// Everything known about one entity pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntityPairRecord {
    pub entity_pair_id: String,
    pub summaries: Vec<Summary>,
    /// Negated text per decomposed sentence id of the first annotator's
    /// A\B summary.
    pub negated: BTreeMap<String, String>,
    pub paraphrases: Vec<Summary>,
}

fn annotator_key(id: &str) -> (u64, &str) {
    (id.parse().unwrap_or(u64::MAX), id)
}

fn find<'a>(pool: &'a [Summary], side: Side, annotator: &str) -> Option<&'a Summary> {
    pool.iter().find(|s| s.side == side && s.annotator_id == annotator)
}

impl EntityPairRecord {
    pub fn summary(&self, side: Side, annotator: &str) -> Option<&Summary> {
        find(&self.summaries, side, annotator)
    }

    pub fn paraphrase(&self, side: Side, annotator: &str) -> Option<&Summary> {
        find(&self.paraphrases, side, annotator)
    }

    /// Annotators with an A\B summary, numeric ids in numeric order.
    pub fn annotators(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .summaries
            .iter()
            .filter(|s| s.side == Side::AMinusB)
            .map(|s| s.annotator_id.as_str())
            .collect();
        ids.sort_by_key(|id| annotator_key(id));
        ids.dedup();
        ids
    }

    pub fn first_annotator(&self) -> Option<&str> {
        self.annotators().first().copied()
    }

    /// Invariant violations of this record.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.entity_pair_id.trim().is_empty() {
            out.push("entity_pair_id is empty".to_string());
        }
        if self.annotators().is_empty() {
            out.push(format!("pair {}: no a_minus_b summary", self.entity_pair_id));
        }
        let mut keys = BTreeSet::new();
        for s in self.summaries.iter().chain(&self.paraphrases) {
            if s.entity_pair_id != self.entity_pair_id {
                out.push(format!(
                    "pair {}: summary tagged with pair {}",
                    self.entity_pair_id, s.entity_pair_id
                ));
            }
            for v in crate::model::validate_summary(s) {
                out.push(format!("pair {} {}/{}: {v}", self.entity_pair_id, s.side, s.annotator_id));
            }
        }
        for s in &self.summaries {
            if !keys.insert((s.side, s.annotator_id.as_str())) {
                out.push(format!(
                    "pair {}: duplicate summary {}/{}",
                    self.entity_pair_id, s.side, s.annotator_id
                ));
            }
        }
        if let Some(first) = self.first_annotator().and_then(|a| self.summary(Side::AMinusB, a)) {
            let sources: BTreeSet<&str> = first.sentences.iter().map(|s| s.id.as_str()).collect();
            for key in self.negated.keys() {
                let source = key.split_once('.').map_or(key.as_str(), |(src, _)| src);
                if !sources.contains(source) {
                    out.push(format!(
                        "pair {}: negation key {key:?} references no sentence of the first a_minus_b summary",
                        self.entity_pair_id
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    ReferenceContrastive,
    ReferenceSimilar,
    SyntheticLowContrast,
    SyntheticHighContrast,
    SyntheticContrast,
}

impl DatasetName {
    pub const ALL: [DatasetName; 5] = [
        DatasetName::SyntheticLowContrast,
        DatasetName::ReferenceSimilar,
        DatasetName::ReferenceContrastive,
        DatasetName::SyntheticHighContrast,
        DatasetName::SyntheticContrast,
    ];

    /// Datasets in the order of increasing expected contrast.
    pub const ORDERED: [DatasetName; 4] = [
        DatasetName::SyntheticLowContrast,
        DatasetName::ReferenceSimilar,
        DatasetName::ReferenceContrastive,
        DatasetName::SyntheticHighContrast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::ReferenceContrastive => "reference_contrastive",
            DatasetName::ReferenceSimilar => "reference_similar",
            DatasetName::SyntheticLowContrast => "synthetic_low_contrast",
            DatasetName::SyntheticHighContrast => "synthetic_high_contrast",
            DatasetName::SyntheticContrast => "synthetic_contrast",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            DatasetName::ReferenceContrastive => "Reference Contrastive",
            DatasetName::ReferenceSimilar => "Reference Similar",
            DatasetName::SyntheticLowContrast => "Synthetic Low Contrast",
            DatasetName::SyntheticHighContrast => "Synthetic High Contrast",
            DatasetName::SyntheticContrast => "Synthetic Contrast",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        DatasetName::ALL
            .into_iter()
            .find(|d| d.as_str().replace('_', "") == norm)
    }

    /// Provenance tags (left, right) that this dataset's rule produces.
    fn expected_sources(self) -> (SourceKind, SourceKind) {
        use SourceKind::*;
        match self {
            DatasetName::ReferenceContrastive => (Reference, Reference),
            DatasetName::ReferenceSimilar => (Reference, Reference),
            DatasetName::SyntheticLowContrast => (Reference, Paraphrase),
            DatasetName::SyntheticHighContrast => (Reference, Negation),
            DatasetName::SyntheticContrast => (Paraphrase, Paraphrase),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Reference,
    Paraphrase,
    Negation,
}

/// Where one side of a dataset pair came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTag {
    pub kind: SourceKind,
    pub side: Side,
    pub annotator_id: String,
}

impl SourceTag {
    fn of(kind: SourceKind, s: &Summary) -> Self {
        Self {
            kind,
            side: s.side,
            annotator_id: s.annotator_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub pair_id: String,
    pub left: Summary,
    pub right: Summary,
    pub left_source: SourceTag,
    pub right_source: SourceTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    pub name: DatasetName,
    pub pairs: Vec<DatasetPair>,
}

impl ExperimentDataset {
    /// Checks every pair's provenance against the dataset's construction rule.
    pub fn verify_provenance(&self) -> Result<()> {
        let (l, r) = self.name.expected_sources();
        for p in &self.pairs {
            let ok = p.left_source.kind == l
                && p.right_source.kind == r
                && match self.name {
                    DatasetName::ReferenceContrastive | DatasetName::SyntheticContrast => {
                        p.left_source.side == Side::AMinusB
                            && p.right_source.side == Side::BMinusA
                            && p.left_source.annotator_id == p.right_source.annotator_id
                    }
                    DatasetName::ReferenceSimilar => {
                        p.left_source.side == Side::AMinusB
                            && p.right_source.side == Side::AMinusB
                            && p.left_source.annotator_id != p.right_source.annotator_id
                    }
                    DatasetName::SyntheticLowContrast | DatasetName::SyntheticHighContrast => {
                        p.left_source.side == Side::AMinusB
                            && p.right_source.side == Side::AMinusB
                            && p.left_source.annotator_id == p.right_source.annotator_id
                    }
                };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "pair {} does not follow the {} rule",
                    p.pair_id, self.name
                )));
            }
        }
        Ok(())
    }
}

fn missing(pair_id: &str, ingredient: impl Into<String>) -> Error {
    Error::MissingIngredient {
        pair_id: pair_id.to_string(),
        ingredient: ingredient.into(),
    }
}

fn require<'a>(found: Option<&'a Summary>, pair_id: &str, what: &str) -> Result<&'a Summary> {
    found.ok_or_else(|| missing(pair_id, what))
}

/// Inputs some datasets need beyond the corpus itself.
#[derive(Clone, Copy)]
pub struct BuildContext<'a> {
    /// Decomposes the base summary so negations can be matched and rejoined.
    pub chat: Option<&'a dyn ChatCompletionBackend>,
    pub decomposition: &'a DecompositionConfig,
}

/// Builds one experiment dataset, one pair per entity pair.
pub fn build_dataset(
    corpus: &[EntityPairRecord],
    name: DatasetName,
    ctx: BuildContext<'_>,
) -> Result<ExperimentDataset> {
    let mut pairs = Vec::with_capacity(corpus.len());
    for record in corpus {
        let id = record.entity_pair_id.as_str();
        let first = record
            .first_annotator()
            .ok_or_else(|| missing(id, "a_minus_b summary"))?;
        let base = require(record.summary(Side::AMinusB, first), id, "a_minus_b summary")?;
        let (left, left_kind, right, right_kind) = match name {
            DatasetName::ReferenceContrastive => {
                let other = require(
                    record.summary(Side::BMinusA, first),
                    id,
                    &format!("b_minus_a summary of annotator {first}"),
                )?;
                (base.clone(), SourceKind::Reference, other.clone(), SourceKind::Reference)
            }
            DatasetName::ReferenceSimilar => {
                let second = record
                    .annotators()
                    .get(1)
                    .copied()
                    .ok_or_else(|| missing(id, "a_minus_b summary of a second annotator"))?;
                let other = require(record.summary(Side::AMinusB, second), id, "second a_minus_b summary")?;
                (base.clone(), SourceKind::Reference, other.clone(), SourceKind::Reference)
            }
            DatasetName::SyntheticLowContrast => {
                let para = require(
                    record.paraphrase(Side::AMinusB, first),
                    id,
                    &format!("paraphrase of a_minus_b annotator {first}"),
                )?;
                (base.clone(), SourceKind::Reference, para.clone(), SourceKind::Paraphrase)
            }
            DatasetName::SyntheticHighContrast => {
                if record.negated.is_empty() {
                    return Err(missing(id, "negations"));
                }
                let chat = ctx.chat.ok_or_else(|| missing(id, "decomposition backend for negations"))?;
                let decomposed = decompose_summary(base, chat, ctx.decomposition)?;
                let negated = recombine_negations(&decomposed, &record.negated)?;
                (base.clone(), SourceKind::Reference, negated, SourceKind::Negation)
            }
            DatasetName::SyntheticContrast => {
                let a = require(
                    record.paraphrase(Side::AMinusB, first),
                    id,
                    &format!("paraphrase of a_minus_b annotator {first}"),
                )?;
                let b = require(
                    record.paraphrase(Side::BMinusA, first),
                    id,
                    &format!("paraphrase of b_minus_a annotator {first}"),
                )?;
                (a.clone(), SourceKind::Paraphrase, b.clone(), SourceKind::Paraphrase)
            }
        };
        pairs.push(DatasetPair {
            pair_id: record.entity_pair_id.clone(),
            left_source: SourceTag::of(left_kind, &left),
            right_source: SourceTag::of(right_kind, &right),
            left,
            right,
        });
    }
    Ok(ExperimentDataset { name, pairs })
}

/// One completion per summary with the fixed paraphrase prompt.
pub fn paraphrase_summary(summary: &Summary, chat: &dyn ChatCompletionBackend) -> Result<Summary> {
    summary.ensure_valid()?;
    let label = format!("{}/{}/{}", summary.entity_pair_id, summary.side, summary.annotator_id);
    let user = format!("{PARAPHRASE_PROMPT}\n\n{}", summary.text());
    let completion = chat
        .complete("", &user, PARAPHRASE_MAX_TOKENS, PARAPHRASE_TEMPERATURE)
        .map_err(|source| Error::Backend {
            sentence_id: label.clone(),
            source,
        })?;
    let text = completion.trim();
    let text = text.strip_prefix(PARAPHRASE_PROMPT).map_or(text, |t| t.trim_start());
    if text.is_empty() {
        return Err(Error::EmptyCompletion(label));
    }
    Ok(Summary::new(
        summary.side,
        summary.entity_pair_id.clone(),
        summary.annotator_id.clone(),
        segment_sentences(text),
    ))
}

fn strip_terminal_period(text: &str) -> &str {
    let t = text.trim_end();
    t.strip_suffix('.').unwrap_or(t).trim_end()
}

fn lowercase_lead(text: &str) -> String {
    let text = text.trim_start();
    let mut words = text.split_whitespace();
    let first = words.next().unwrap_or("");
    let keep = first == "I"
        || first.starts_with("I'")
        || first.chars().filter(|c| c.is_alphabetic()).skip(1).any(char::is_uppercase);
    if keep {
        return text.to_string();
    }
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Rejoins negated single-claim sentences into one sentence per source
/// sentence, in source order, with ", and ".
pub fn recombine_negations(
    decomposed: &DecomposedSummary,
    negated_texts: &BTreeMap<String, String>,
) -> Result<Summary> {
    let missing: Vec<String> = decomposed
        .sentences()
        .iter()
        .filter(|s| negated_texts.get(&s.id).is_none_or(|t| t.trim().is_empty()))
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::NegationCoverage(missing));
    }
    let origin = decomposed.origin();
    let mut sentences = Vec::with_capacity(origin.len());
    for source in &origin.sentences {
        let claims: Vec<&str> = decomposed
            .sentences()
            .iter()
            .filter(|s| s.source_id.as_deref() == Some(source.id.as_str()))
            .map(|s| negated_texts[&s.id].trim())
            .collect();
        let last = claims.len() - 1;
        let mut text = String::new();
        for (k, claim) in claims.iter().enumerate() {
            let piece = if k == 0 { (*claim).to_string() } else { lowercase_lead(claim) };
            if k > 0 {
                text.push_str(CONJUNCTION);
            }
            if k == last {
                text.push_str(&piece);
            } else {
                text.push_str(strip_terminal_period(&piece));
            }
        }
        sentences.push(Sentence::new(source.id.clone(), &text));
    }
    Ok(Summary::new(
        origin.side,
        origin.entity_pair_id.clone(),
        origin.annotator_id.clone(),
        sentences,
    ))
}

const AUXILIARIES: [&str; 14] = [
    "is", "are", "was", "were", "has", "have", "had", "can", "will", "does", "do", "did", "would", "could",
];

/// Crude negation by inserting "not" after the first auxiliary verb.
/// Annotation aid only; metric code never calls it.
pub fn naive_negate(sentence: &str) -> String {
    let words: Vec<&str> = sentence.split(' ').collect();
    if let Some(pos) = words
        .iter()
        .position(|w| AUXILIARIES.contains(&w.to_lowercase().trim_matches(|c: char| !c.is_alphabetic())))
    {
        let mut out: Vec<&str> = words[..=pos].to_vec();
        out.push("not");
        out.extend_from_slice(&words[pos + 1..]);
        return out.join(" ");
    }
    format!("It is not true that {}", lowercase_lead(sentence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{EchoChat, FixtureChat};
    use alloc::vec;

    fn record(id: &str) -> EntityPairRecord {
        EntityPairRecord {
            entity_pair_id: id.into(),
            summaries: vec![
                Summary::from_text(Side::AMinusB, id, "1", "Great pool. Small rooms."),
                Summary::from_text(Side::BMinusA, id, "1", "No pool. Huge rooms."),
                Summary::from_text(Side::AMinusB, id, "2", "The pool is great."),
            ],
            negated: BTreeMap::new(),
            paraphrases: vec![],
        }
    }

    fn ctx(cfg: &DecompositionConfig) -> BuildContext<'_> {
        BuildContext {
            chat: Some(&EchoChat),
            decomposition: cfg,
        }
    }

    #[test]
    fn reference_similar_pairs_two_a_minus_b_summaries() {
        let cfg = DecompositionConfig::default();
        let ds = build_dataset(&[record("p1"), record("p2")], DatasetName::ReferenceSimilar, ctx(&cfg)).unwrap();
        assert_eq!(ds.pairs.len(), 2);
        for p in &ds.pairs {
            assert_eq!(p.left.side, Side::AMinusB);
            assert_eq!(p.right.side, Side::AMinusB);
            assert_eq!((p.left.annotator_id.as_str(), p.right.annotator_id.as_str()), ("1", "2"));
        }
        ds.verify_provenance().unwrap();
    }

    #[test]
    fn reference_contrastive_single_record() {
        let cfg = DecompositionConfig::default();
        let ds = build_dataset(&[record("p1")], DatasetName::ReferenceContrastive, ctx(&cfg)).unwrap();
        assert_eq!(ds.pairs.len(), 1);
        assert_eq!(ds.pairs[0].left.side, Side::AMinusB);
        assert_eq!(ds.pairs[0].right.side, Side::BMinusA);
        ds.verify_provenance().unwrap();
    }

    #[test]
    fn high_contrast_without_negations_is_missing_ingredient() {
        let cfg = DecompositionConfig::default();
        let err = build_dataset(&[record("p1")], DatasetName::SyntheticHighContrast, ctx(&cfg)).unwrap_err();
        assert!(matches!(err, Error::MissingIngredient { ref pair_id, .. } if pair_id == "p1"), "{err}");
        let err = build_dataset(&[record("p1")], DatasetName::SyntheticLowContrast, ctx(&cfg)).unwrap_err();
        assert!(matches!(err, Error::MissingIngredient { .. }));
    }

    #[test]
    fn synthetic_datasets_from_full_record() {
        let cfg = DecompositionConfig::default();
        let mut r = record("p1");
        r.negated.insert("s0.0".into(), "Terrible pool.".into());
        r.negated.insert("s1.0".into(), "Large rooms.".into());
        r.paraphrases = vec![
            Summary::from_text(Side::AMinusB, "p1", "1", "Excellent pool. Tiny rooms."),
            Summary::from_text(Side::BMinusA, "p1", "1", "There is no pool. Enormous rooms."),
        ];
        let high = build_dataset(&[r.clone()], DatasetName::SyntheticHighContrast, ctx(&cfg)).unwrap();
        assert_eq!(high.pairs[0].right.text(), "Terrible pool. Large rooms.");
        high.verify_provenance().unwrap();
        for name in DatasetName::ALL {
            let ds = build_dataset(&[r.clone()], name, ctx(&cfg)).unwrap();
            assert_eq!(ds.pairs.len(), 1);
            ds.verify_provenance().unwrap();
        }
        let mut wrong = build_dataset(&[r], DatasetName::SyntheticContrast, ctx(&cfg)).unwrap();
        wrong.name = DatasetName::SyntheticHighContrast;
        assert!(wrong.verify_provenance().is_err());
    }

    fn decomposed_two_claims() -> DecomposedSummary {
        let origin = Summary::from_text(Side::AMinusB, "p", "1", "This is a hotel located in an excellent place. Great view.");
        DecomposedSummary::from_parts(
            origin,
            vec![
                Sentence::derived("s0.0", "This is a hotel.", "s0"),
                Sentence::derived("s0.1", "The hotel is located in an excellent place.", "s0"),
                Sentence::derived("s1.0", "Great view.", "s1"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn recombination_joins_with_and() {
        let mut neg = BTreeMap::new();
        neg.insert("s0.0".to_string(), "This is not a hotel.".to_string());
        neg.insert("s0.1".to_string(), "The hotel is located in a terrible place.".to_string());
        neg.insert("s1.0".to_string(), "Awful view.".to_string());
        let out = recombine_negations(&decomposed_two_claims(), &neg).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(
            out.sentences[0].text,
            "This is not a hotel, and the hotel is located in a terrible place."
        );
        assert_eq!(out.sentences[1].text, "Awful view.");
        assert_eq!(out.sentences[0].id, "s0");
    }

    #[test]
    fn recombination_reports_missing_ids() {
        let mut neg = BTreeMap::new();
        neg.insert("s0.0".to_string(), "This is not a hotel.".to_string());
        let err = recombine_negations(&decomposed_two_claims(), &neg).unwrap_err();
        assert_eq!(err, Error::NegationCoverage(vec!["s0.1".into(), "s1.0".into()]));
    }

    #[test]
    fn lead_lowercasing_keeps_pronoun_i_and_acronyms() {
        assert_eq!(lowercase_lead("The room."), "the room.");
        assert_eq!(lowercase_lead("I liked it."), "I liked it.");
        assert_eq!(lowercase_lead("CN Tower is near."), "CN Tower is near.");
    }

    #[test]
    fn paraphrase_uses_fixed_prompt() {
        let s = Summary::from_text(Side::AMinusB, "p", "1", "Great pool. Small rooms.");
        let chat = FixtureChat::new([(
            "Paraphrase this\n\nGreat pool. Small rooms.".to_string(),
            "\nExcellent pool. Tiny rooms.".to_string(),
        )]);
        let p = paraphrase_summary(&s, &chat).unwrap();
        assert_eq!(p.text(), "Excellent pool. Tiny rooms.");
        assert_eq!(p.len(), 2);
        assert_eq!(p.annotator_id, "1");
    }

    #[test]
    fn echo_paraphrase_is_identity_and_blank_is_error() {
        let s = Summary::from_text(Side::AMinusB, "p", "1", "Great pool. Small rooms.");
        assert_eq!(paraphrase_summary(&s, &EchoChat).unwrap().text(), s.text());
        let blank = FixtureChat::new([("Paraphrase this\n\nGreat pool. Small rooms.".to_string(), "  \n ".to_string())]);
        assert!(matches!(paraphrase_summary(&s, &blank), Err(Error::EmptyCompletion(_))));
    }

    #[test]
    fn record_violations() {
        let mut r = record("p1");
        assert!(r.violations().is_empty());
        r.negated.insert("s7.0".into(), "x".into());
        assert_eq!(r.violations().len(), 1);
        let empty = EntityPairRecord {
            entity_pair_id: "p2".into(),
            ..Default::default()
        };
        assert!(empty.violations()[0].contains("no a_minus_b"));
    }

    #[test]
    fn dataset_names_parse() {
        assert_eq!(DatasetName::parse("SyntheticHighContrast"), Some(DatasetName::SyntheticHighContrast));
        assert_eq!(DatasetName::parse("reference_similar"), Some(DatasetName::ReferenceSimilar));
        assert_eq!(DatasetName::parse("nope"), None);
    }

    #[test]
    fn naive_negation_helper() {
        assert_eq!(naive_negate("The room was clean."), "The room was not clean.");
        assert_eq!(naive_negate("Great view."), "It is not true that great view.");
    }
}
