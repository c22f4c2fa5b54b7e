//! Corpus JSONL reading and writing, plus the CoCoTrip converter.
//!
//! One entity pair per line:
//!
//! ```json
//! {"entity_pair_id": "p1",
//!  "summaries": [{"side": "a_minus_b", "annotator": "1", "text": "..."}],
//!  "negations": [{"sentence_id": "s0.0", "text": "..."}],
//!  "paraphrases": [{"side": "a_minus_b", "annotator": "1", "text": "..."}]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use contrast_core::{EntityPairRecord, Side, Summary};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryEntry {
    pub side: Side,
    pub annotator: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegationEntry {
    pub sentence_id: String,
    pub text: String,
}

/// One corpus line as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusLine {
    pub entity_pair_id: String,
    pub summaries: Vec<SummaryEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negations: Vec<NegationEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paraphrases: Vec<SummaryEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: pair {pair_id}: {}", problems.join("; "))]
    Schema {
        line: usize,
        pair_id: String,
        problems: Vec<String>,
    },
    #[error("line {line}: duplicate entity_pair_id {pair_id:?} (first on line {first})")]
    Duplicate { line: usize, pair_id: String, first: usize },
    #[error("corpus has no records")]
    Empty,
}

impl CorpusLine {
    pub fn into_record(self) -> EntityPairRecord {
        let id = self.entity_pair_id;
        let to_summary = |e: SummaryEntry| Summary::from_text(e.side, id.clone(), e.annotator, &e.text);
        EntityPairRecord {
            summaries: self.summaries.into_iter().map(to_summary).collect(),
            paraphrases: self.paraphrases.into_iter().map(to_summary).collect(),
            negated: self.negations.into_iter().map(|n| (n.sentence_id, n.text)).collect(),
            entity_pair_id: id,
        }
    }

    pub fn from_record(record: &EntityPairRecord) -> Self {
        let entry = |s: &Summary| SummaryEntry {
            side: s.side,
            annotator: s.annotator_id.clone(),
            text: s.text(),
        };
        Self {
            entity_pair_id: record.entity_pair_id.clone(),
            summaries: record.summaries.iter().map(entry).collect(),
            negations: record
                .negated
                .iter()
                .map(|(k, v)| NegationEntry {
                    sentence_id: k.clone(),
                    text: v.clone(),
                })
                .collect(),
            paraphrases: record.paraphrases.iter().map(entry).collect(),
        }
    }
}

pub fn parse_corpus(text: &str) -> Result<Vec<EntityPairRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(raw).map_err(|e| CorpusError::Parse {
            line,
            reason: e.to_string(),
        })?;
        if let Some(&first) = seen.get(&parsed.entity_pair_id) {
            return Err(CorpusError::Duplicate {
                line,
                pair_id: parsed.entity_pair_id,
                first,
            });
        }
        seen.insert(parsed.entity_pair_id.clone(), line);
        let record = parsed.into_record();
        let problems = record.violations();
        if !problems.is_empty() {
            return Err(CorpusError::Schema {
                line,
                pair_id: record.entity_pair_id,
                problems,
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(records)
}

pub fn load_corpus(path: &Path) -> Result<Vec<EntityPairRecord>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text)
}

pub fn corpus_to_jsonl(records: &[EntityPairRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&CorpusLine::from_record(r)).expect("corpus lines serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ConvertError {
    #[error("input is neither a JSON array nor JSON lines: {0}")]
    Format(String),
    #[error("entry {index}: {reason}")]
    Entry { index: usize, reason: String },
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn texts(v: Option<&Value>) -> Vec<String> {
    match v {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Array(items)) => items.iter().filter_map(|i| i.as_str().map(String::from)).collect(),
        _ => Vec::new(),
    }
}

/// Converts CoCoTrip-style entries into corpus records.
///
/// Each entry is an object with `entity_a_summary`, `entity_b_summary` and
/// optionally `common_summary`, each a string or a list of strings (one per
/// annotator, numbered from 1). The pair id is taken from `entity_pair_id`,
/// `pair_id` or `id`, else built from `entity_a`/`entity_b`, else the
/// entry index.
pub fn convert_cocotrip(input: &str) -> Result<Vec<EntityPairRecord>, ConvertError> {
    let entries: Vec<Value> = match serde_json::from_str::<Value>(input) {
        Ok(Value::Array(items)) => items,
        Ok(single @ Value::Object(_)) => vec![single],
        _ => input
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| ConvertError::Format(e.to_string()))?,
    };
    let mut out = Vec::with_capacity(entries.len());
    let mut ids = BTreeSet::new();
    for (index, entry) in entries.iter().enumerate() {
        let obj = entry.as_object().ok_or_else(|| ConvertError::Entry {
            index,
            reason: "not a JSON object".into(),
        })?;
        let explicit = ["entity_pair_id", "pair_id", "id"]
            .iter()
            .find_map(|k| obj.get(*k).and_then(id_string));
        let from_entities = match (
            obj.get("entity_a").and_then(id_string),
            obj.get("entity_b").and_then(id_string),
        ) {
            (Some(a), Some(b)) => Some(format!("{a}__{b}")),
            _ => None,
        };
        let pair_id = explicit.or(from_entities).unwrap_or_else(|| format!("pair{index}"));
        if !ids.insert(pair_id.clone()) {
            return Err(ConvertError::Entry {
                index,
                reason: format!("duplicate pair id {pair_id:?}"),
            });
        }
        let mut summaries = Vec::new();
        for (key, side) in [
            ("entity_a_summary", Side::AMinusB),
            ("entity_b_summary", Side::BMinusA),
            ("common_summary", Side::ACommon),
        ] {
            for (k, text) in texts(obj.get(key)).into_iter().enumerate() {
                summaries.push(Summary::from_text(side, pair_id.clone(), (k + 1).to_string(), &text));
            }
        }
        let record = EntityPairRecord {
            entity_pair_id: pair_id,
            summaries,
            ..Default::default()
        };
        let problems = record.violations();
        if !problems.is_empty() {
            return Err(ConvertError::Entry {
                index,
                reason: problems.join("; "),
            });
        }
        out.push(record);
    }
    Ok(out)
}
