//! Distinctiveness Score: lexical contrast from distinct-token overlap.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{MetricKind, MetricReport, Summary};
use crate::text::{tokenize, TOKENIZER_VERSION};

/// Two contrastive summaries, optionally with the common summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarySet {
    members: Vec<Summary>,
}

impl SummarySet {
    pub fn new(members: Vec<Summary>) -> Result<Self> {
        if !(2..=3).contains(&members.len()) {
            return Err(Error::Arity {
                expected: 3,
                actual: members.len(),
            });
        }
        let sides: BTreeSet<_> = members.iter().map(|m| m.side).collect();
        if sides.len() != members.len() {
            return Err(Error::InvalidParameter("summary sides must be distinct".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Summary] {
        &self.members
    }
}

fn token_set(summary: &Summary) -> BTreeSet<String> {
    tokenize(&summary.text()).distinct().clone()
}

/// `100 * (1 - |L ∩ R| / |L ∪ R|)` over distinct tokens.
pub fn ds_from_sets(left: &BTreeSet<String>, right: &BTreeSet<String>) -> Result<f64> {
    let union = left.union(right).count();
    if union == 0 {
        return Err(Error::DegenerateInput("both summaries have no tokens".into()));
    }
    let inter = left.intersection(right).count();
    Ok(100.0 * (union - inter) as f64 / union as f64)
}

fn report(metric: MetricKind, score: f64) -> MetricReport {
    MetricReport::new(metric, score)
        .with_meta("tokenizer", TOKENIZER_VERSION)
        .with_meta("overlap", "distinct-token sets")
}

/// Pairwise Distinctiveness Score between two contrastive summaries.
pub fn ds_pairwise(left: &Summary, right: &Summary) -> Result<MetricReport> {
    let score = ds_from_sets(&token_set(left), &token_set(right))?;
    Ok(report(MetricKind::Ds, score))
}

/// Three-summary Distinctiveness Score: pairwise overlaps summed, the
/// triple overlap subtracted twice, normalized by the union.
pub fn ds_multi(set: &SummarySet) -> Result<MetricReport> {
    let [a, b, c]: [BTreeSet<String>; 3] = match set.members() {
        [a, b, c] => [token_set(a), token_set(b), token_set(c)],
        other => {
            return Err(Error::Arity {
                expected: 3,
                actual: other.len(),
            })
        }
    };
    let union: BTreeSet<&String> = a.iter().chain(&b).chain(&c).collect();
    if union.is_empty() {
        return Err(Error::DegenerateInput("all summaries have no tokens".into()));
    }
    let pairwise = a.intersection(&b).count() + a.intersection(&c).count() + b.intersection(&c).count();
    let triple = a.iter().filter(|t| b.contains(*t) && c.contains(*t)).count();
    // pairwise >= 2 * triple since each triple token sits in all three pairs.
    let overlap = pairwise - 2 * triple;
    let score = 100.0 * (union.len() as f64 - overlap as f64) / union.len() as f64;
    Ok(report(MetricKind::DsMulti, score).with_meta("members", format!("{}", set.members().len())))
}
