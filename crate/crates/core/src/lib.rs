//! Contrastiveness metrics for pairs of contrastive opinion summaries.
//!
//! Three metrics are provided:
//!
//! * [`caspr`]: NLI-based contrast over single-claim sentences;
//! * [`lexical`]: the Distinctiveness Score (token-set overlap);
//! * [`embedding`]: inverted BERTScore (greedy cosine matching).
//!
//! The crate is `no_std` with `alloc`. Model inference is reached through
//! the traits in [`backend`]; network clients, disk caches and file
//! formats live in the `contrast-eval` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod backend;
pub mod caspr;
pub mod dataset;
pub mod decompose;
pub mod embedding;
pub mod error;
pub mod lexical;
pub mod model;
pub mod stats;
pub mod text;

pub use backend::{
    stub_nli, ChatCompletionBackend, EchoChat, Embedding, EmbeddingBackend, FixtureChat, FixtureEmbedding,
    HashEmbedding, Matcher, NliBackend, StubNli, StubNliRule,
};
pub use caspr::{
    build_matrix, caspr, caspr_detailed, caspr_score, detect_universal_hypotheses, fuse_labels, indicators,
    sentence_label_score, CasprOutcome, ComparisonMatrix, Indicators, Position,
};
pub use dataset::{
    build_dataset, paraphrase_summary, recombine_negations, BuildContext, DatasetName, EntityPairRecord,
    ExperimentDataset,
};
pub use decompose::{
    decompose_sentence, decompose_summary, DecomposedSummary, DecompositionConfig, DecompositionRequest,
};
pub use embedding::{bs_inverse, greedy_match, greedy_match_f1, TokenEmbeddingSequence};
pub use error::{BackendError, Error, Result};
pub use lexical::{ds_multi, ds_pairwise, SummarySet};
pub use model::{
    validate_summary, ComparisonLabel, MetricKind, MetricReport, NliLabel, Sentence, SentenceTally, Side, Summary,
};
pub use stats::{bootstrap_normal_ci, spearman_rho, BootstrapResult, ScoreSample};
pub use text::{segment_sentences, tokenize, TokenBag};
