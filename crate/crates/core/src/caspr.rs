//! CASPR: contrast between two summaries from bidirectional NLI over every
//! cross-summary pair of single-claim sentences.
//!
//! Each sentence pair gets one fused label from its two directional
//! verdicts. Each sentence then scores +1 (contrastive) or -1 (similar)
//! from the fused labels of its row or column:
//!
//! * all neutral: +1, the sentence covers an aspect the other side lacks;
//! * otherwise entailments >= contradictions: -1 (ties count as similar);
//! * otherwise: +1.
//!
//! The mean over both summaries' sentences is mapped from [-1, 1] to
//! [0, 100].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatCompletionBackend, NliBackend};
use crate::decompose::{decompose_summary, DecomposedSummary, DecompositionConfig, PARSE_SCHEME};
use crate::error::{BackendError, Error, Result};
use crate::model::{ComparisonLabel, MetricKind, MetricReport, NliLabel, SentenceTally, Summary};

use NliLabel::{Contradiction as Cont, Entailment as Ent, Neutral as Neut};

/// Values of the three comparison indicators for one sentence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Indicators {
    pub cont: bool,
    pub ent: bool,
    pub neut: bool,
}

/// Evaluates the contradiction, entailment and neutral indicators from the
/// two directional verdicts.
pub fn indicators(forward: NliLabel, backward: NliLabel) -> Indicators {
    Indicators {
        cont: (forward == Cont && backward != Ent) || (backward == Cont && forward != Ent),
        ent: (forward == Ent && backward != Cont) || (backward == Ent && forward != Cont),
        neut: (forward == Neut && backward == Neut)
            || (forward == Cont && backward == Ent)
            || (forward == Ent && backward == Cont),
    }
}

/// Fuses the two directional verdicts of a sentence pair into one label.
pub fn fuse_labels(forward: NliLabel, backward: NliLabel) -> NliLabel {
    match (forward, backward) {
        (Neut, Neut) | (Cont, Ent) | (Ent, Cont) => Neut,
        (Cont, _) | (_, Cont) => Cont,
        (Ent, _) | (_, Ent) => Ent,
    }
}

/// Fused labels for every (left sentence, right sentence) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    left: DecomposedSummary,
    right: DecomposedSummary,
    /// Row-major, `left.len()` rows by `right.len()` columns.
    cells: Vec<ComparisonLabel>,
}

impl ComparisonMatrix {
    pub fn from_cells(
        left: DecomposedSummary,
        right: DecomposedSummary,
        cells: Vec<ComparisonLabel>,
    ) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::EmptySummary(
                "both decomposed summaries need at least one sentence".into(),
            ));
        }
        if cells.len() != left.len() * right.len() {
            return Err(Error::LengthMismatch {
                left: left.len() * right.len(),
                right: cells.len(),
            });
        }
        if let Some(bad) = cells.iter().find(|c| c.fused != fuse_labels(c.forward, c.backward)) {
            return Err(Error::InvalidParameter(format!(
                "cell fused label {} inconsistent with ({}, {})",
                bad.fused, bad.forward, bad.backward
            )));
        }
        Ok(Self { left, right, cells })
    }

    pub fn left(&self) -> &DecomposedSummary {
        &self.left
    }

    pub fn right(&self) -> &DecomposedSummary {
        &self.right
    }

    pub fn rows(&self) -> usize {
        self.left.len()
    }

    pub fn cols(&self) -> usize {
        self.right.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> ComparisonLabel {
        self.cells[row * self.cols() + col]
    }

    pub fn cells(&self) -> &[ComparisonLabel] {
        &self.cells
    }

    /// The matrix with the summaries exchanged and every cell's directions
    /// swapped.
    pub fn transpose(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for col in 0..self.cols() {
            for row in 0..self.rows() {
                cells.push(self.cell(row, col).swapped());
            }
        }
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
            cells,
        }
    }
}

/// Runs both NLI directions for every cross pair (2 * rows * cols calls).
pub fn build_matrix(
    left: &DecomposedSummary,
    right: &DecomposedSummary,
    nli: &dyn NliBackend,
) -> Result<ComparisonMatrix> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::EmptySummary(
            "both decomposed summaries need at least one sentence".into(),
        ));
    }
    let mut cells = Vec::with_capacity(left.len() * right.len());
    for (row, l) in left.sentences().iter().enumerate() {
        for (col, r) in right.sentences().iter().enumerate() {
            cells.push(
                compare_pair(&l.text, &r.text, nli).map_err(|source| Error::Comparison { row, col, source })?,
            );
        }
    }
    ComparisonMatrix::from_cells(left.clone(), right.clone(), cells)
}

/// Both directional verdicts for one pair, fused.
pub fn compare_pair(
    left: &str,
    right: &str,
    nli: &dyn NliBackend,
) -> core::result::Result<ComparisonLabel, BackendError> {
    let forward = nli.predict(left, right)?;
    let backward = nli.predict(right, left)?;
    Ok(ComparisonLabel::new(forward, backward))
}

/// +1 for a contrastive sentence, -1 for a similar one. The all-neutral
/// case is checked before the tie rule.
pub fn sentence_label_score(n_cont: usize, n_ent: usize, n_neut: usize, opposing: usize) -> Result<i8> {
    if opposing == 0 || n_cont + n_ent + n_neut != opposing {
        return Err(Error::InconsistentCounts {
            n_cont,
            n_ent,
            n_neut,
            opposing,
        });
    }
    Ok(if n_neut == opposing {
        1
    } else if n_ent >= n_cont {
        -1
    } else {
        1
    })
}

/// Which summary of a comparison a sentence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Left,
    Right,
}

fn tally(id: &str, labels: impl Iterator<Item = NliLabel>) -> SentenceTally {
    let (mut n_cont, mut n_ent, mut n_neut) = (0, 0, 0);
    for label in labels {
        match label {
            Cont => n_cont += 1,
            Ent => n_ent += 1,
            Neut => n_neut += 1,
        }
    }
    let opposing = n_cont + n_ent + n_neut;
    let label_score =
        sentence_label_score(n_cont, n_ent, n_neut, opposing).expect("tally counts are consistent");
    SentenceTally {
        sentence_id: id.to_string(),
        n_cont,
        n_ent,
        n_neut,
        label_score,
    }
}

/// Per-sentence tallies, left summary first.
pub fn sentence_tallies(matrix: &ComparisonMatrix) -> Vec<(Position, SentenceTally)> {
    let mut out = Vec::with_capacity(matrix.rows() + matrix.cols());
    for (row, s) in matrix.left.sentences().iter().enumerate() {
        let labels = (0..matrix.cols()).map(|col| matrix.cell(row, col).fused);
        out.push((Position::Left, tally(&s.id, labels)));
    }
    for (col, s) in matrix.right.sentences().iter().enumerate() {
        let labels = (0..matrix.rows()).map(|row| matrix.cell(row, col).fused);
        out.push((Position::Right, tally(&s.id, labels)));
    }
    out
}

/// Aggregates a complete comparison matrix into a CASPR report.
pub fn caspr_score(matrix: &ComparisonMatrix) -> MetricReport {
    let tallies = sentence_tallies(matrix);
    let total: i64 = tallies.iter().map(|(_, t)| i64::from(t.label_score)).sum();
    let count = tallies.len();
    let normalized = total as f64 / count as f64;
    let score = 100.0 * (normalized + 1.0) / 2.0;
    let mut report = MetricReport::new(MetricKind::Caspr, score)
        .with_meta("label_sum", format!("{total}"))
        .with_meta("label_mean", format!("{normalized:.6}"))
        .with_meta("left_sentences", format!("{}", matrix.rows()))
        .with_meta("right_sentences", format!("{}", matrix.cols()));
    report.per_sentence = Some(
        tallies
            .into_iter()
            .map(|(pos, mut t)| {
                t.sentence_id = format!("{}:{}", position_tag(pos), t.sentence_id);
                t
            })
            .collect(),
    );
    report
}

fn position_tag(pos: Position) -> &'static str {
    match pos {
        Position::Left => "left",
        Position::Right => "right",
    }
}

/// Score, comparison matrix and decompositions of one CASPR evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CasprOutcome {
    pub report: MetricReport,
    pub matrix: ComparisonMatrix,
}

/// Decomposes both summaries, compares every cross pair and scores.
pub fn caspr(
    left: &Summary,
    right: &Summary,
    nli: &dyn NliBackend,
    chat: &dyn ChatCompletionBackend,
) -> Result<MetricReport> {
    caspr_detailed(left, right, nli, chat, &DecompositionConfig::default()).map(|o| o.report)
}

pub fn caspr_detailed(
    left: &Summary,
    right: &Summary,
    nli: &dyn NliBackend,
    chat: &dyn ChatCompletionBackend,
    config: &DecompositionConfig,
) -> Result<CasprOutcome> {
    let l = decompose_summary(left, chat, config)?;
    let r = decompose_summary(right, chat, config)?;
    let matrix = build_matrix(&l, &r, nli)?;
    Ok(CasprOutcome {
        report: annotate(caspr_score(&matrix), nli, chat, config),
        matrix,
    })
}

pub fn annotate(
    report: MetricReport,
    nli: &dyn NliBackend,
    chat: &dyn ChatCompletionBackend,
    config: &DecompositionConfig,
) -> MetricReport {
    report
        .with_meta("nli_backend", nli.identity())
        .with_meta("chat_backend", chat.identity())
        .with_meta("decompose_prompt_sha256", config.prompt_hash())
        .with_meta("decompose_parse", PARSE_SCHEME)
}

/// A sentence that most opposing premises entail, whatever they say.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalHypothesis {
    pub position: Position,
    pub sentence_id: String,
    pub text: String,
    pub entailed_by: usize,
    pub opposing: usize,
}

/// Flags hypotheses entailed by at least `threshold` of the opposing
/// premises. Diagnostic only; scores are unchanged.
pub fn detect_universal_hypotheses(matrix: &ComparisonMatrix, threshold: f64) -> Vec<UniversalHypothesis> {
    let mut out = Vec::new();
    let mut check = |position, s: &crate::model::Sentence, entailed_by: usize, opposing: usize| {
        if entailed_by as f64 >= threshold * opposing as f64 && entailed_by > 0 {
            out.push(UniversalHypothesis {
                position,
                sentence_id: s.id.clone(),
                text: s.text.clone(),
                entailed_by,
                opposing,
            });
        }
    };
    // A left sentence is the hypothesis in the backward direction.
    for (row, s) in matrix.left.sentences().iter().enumerate() {
        let n = (0..matrix.cols()).filter(|&c| matrix.cell(row, c).backward == Ent).count();
        check(Position::Left, s, n, matrix.cols());
    }
    for (col, s) in matrix.right.sentences().iter().enumerate() {
        let n = (0..matrix.rows()).filter(|&r| matrix.cell(r, col).forward == Ent).count();
        check(Position::Right, s, n, matrix.rows());
    }
    out
}
