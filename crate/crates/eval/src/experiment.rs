//! The dataset experiment: score every pair of every dataset with every
//! metric, bootstrap the means, check the expected ordering and correlate
//! reference scores with their paraphrased counterparts.

use std::collections::BTreeMap;

use contrast_core::caspr::{detect_universal_hypotheses, UniversalHypothesis};
use contrast_core::dataset::DatasetPair;
use contrast_core::{
    bootstrap_normal_ci, build_dataset, paraphrase_summary, spearman_rho, BootstrapResult, BuildContext,
    ComparisonMatrix, DatasetName, EntityPairRecord, MetricKind, ScoreSample, Side,
};
use serde::Serialize;

use crate::backends::Backends;
use crate::config::{ConfigError, RunConfig};
use crate::scoring::{parallel_map, score_pair, ScoreOptions};

/// Metrics run when none are requested (and their backends exist).
pub const DEFAULT_METRICS: [MetricKind; 3] = [MetricKind::Caspr, MetricKind::Ds, MetricKind::BsInv];

/// Share of opposing premises that must entail a hypothesis to flag it.
pub const UNIVERSAL_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub dataset: DatasetName,
    pub pair_id: String,
    pub metric: MetricKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub dataset: DatasetName,
    pub metric: MetricKind,
    pub n: usize,
    pub mean: f64,
    /// Absent when fewer than two pairs were scored.
    pub bootstrap: Option<BootstrapResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Some dataset of the ordering has no mean.
    Incomplete,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Incomplete => "incomplete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub metric: MetricKind,
    pub means: Vec<(DatasetName, f64)>,
    pub status: CheckStatus,
    /// First adjacent pair that is out of order.
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub metric: MetricKind,
    pub reference: DatasetName,
    pub paraphrased: DatasetName,
    pub n: usize,
    pub reference_mean: Option<f64>,
    pub paraphrased_mean: Option<f64>,
    pub rho: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub stage: String,
    pub dataset: Option<DatasetName>,
    pub pair_id: Option<String>,
    pub metric: Option<MetricKind>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedHypothesis {
    pub dataset: DatasetName,
    pub pair_id: String,
    #[serde(flatten)]
    pub hypothesis: UniversalHypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n_resamples: usize,
    pub confidence: f64,
    pub datasets: Vec<DatasetName>,
    pub metrics: Vec<MetricKind>,
    pub decompose_baselines: bool,
    pub backends: BTreeMap<String, String>,
    pub scores: Vec<PairScore>,
    pub summaries: Vec<MetricSummary>,
    pub ordering: Vec<OrderingCheck>,
    pub correlations: Vec<Correlation>,
    pub universal_hypotheses: Vec<FlaggedHypothesis>,
    pub errors: Vec<ErrorEntry>,
}

impl ExperimentReport {
    pub fn summary(&self, dataset: DatasetName, metric: MetricKind) -> Option<&MetricSummary> {
        self.summaries
            .iter()
            .find(|s| s.dataset == dataset && s.metric == metric)
    }

    pub fn mean(&self, dataset: DatasetName, metric: MetricKind) -> Option<f64> {
        self.summary(dataset, metric).map(|s| s.mean)
    }

    pub fn ordering_for(&self, metric: MetricKind) -> Option<&OrderingCheck> {
        self.ordering.iter().find(|o| o.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDump {
    pub dataset: DatasetName,
    pub pair_id: String,
    pub matrix: ComparisonMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub matrices: Vec<MatrixDump>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("no datasets selected")]
    NoDatasets,
    #[error("no metrics selected")]
    NoMetrics,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn needs_paraphrases(datasets: &[DatasetName]) -> bool {
    datasets
        .iter()
        .any(|d| matches!(d, DatasetName::SyntheticLowContrast | DatasetName::SyntheticContrast))
}

/// Generates the first annotator's missing paraphrases with the chat model.
fn fill_paraphrases(corpus: &mut [EntityPairRecord], backends: &Backends, workers: usize, errors: &mut Vec<ErrorEntry>) {
    let Some(chat) = backends.chat.as_deref() else {
        return;
    };
    let jobs: Vec<(usize, contrast_core::Summary)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            let first = r.first_annotator().map(str::to_string);
            [Side::AMinusB, Side::BMinusA].into_iter().filter_map(move |side| {
                let a = first.as_deref()?;
                if r.paraphrase(side, a).is_some() {
                    return None;
                }
                r.summary(side, a).map(|s| (i, s.clone()))
            })
        })
        .collect();
    let results = parallel_map(&jobs, workers, |(_, s)| paraphrase_summary(s, chat));
    for ((i, source), result) in jobs.into_iter().zip(results) {
        match result {
            Ok(p) => corpus[i].paraphrases.push(p),
            Err(e) => errors.push(ErrorEntry {
                stage: "paraphrase".into(),
                dataset: None,
                pair_id: Some(source.entity_pair_id.clone()),
                metric: None,
                message: e.to_string(),
            }),
        }
    }
}

struct Task<'a> {
    dataset: DatasetName,
    pair: &'a DatasetPair,
    record: &'a EntityPairRecord,
    metric: MetricKind,
}

fn ordering_check(metric: MetricKind, summaries: &[MetricSummary]) -> OrderingCheck {
    let means: Vec<(DatasetName, f64)> = DatasetName::ORDERED
        .iter()
        .filter_map(|d| {
            summaries
                .iter()
                .find(|s| s.dataset == *d && s.metric == metric)
                .map(|s| (*d, s.mean))
        })
        .collect();
    if means.len() < DatasetName::ORDERED.len() {
        return OrderingCheck {
            metric,
            means,
            status: CheckStatus::Incomplete,
            violation: None,
        };
    }
    let violation = means.windows(2).find(|w| w[0].1 >= w[1].1).map(|w| {
        format!(
            "{} ({:.1}) is not below {} ({:.1})",
            w[0].0.title(),
            w[0].1,
            w[1].0.title(),
            w[1].1
        )
    });
    OrderingCheck {
        metric,
        status: if violation.is_none() { CheckStatus::Pass } else { CheckStatus::Fail },
        means,
        violation,
    }
}

fn correlation(metric: MetricKind, scores: &[PairScore], summaries: &[MetricSummary]) -> Correlation {
    let (reference, paraphrased) = (DatasetName::ReferenceContrastive, DatasetName::SyntheticContrast);
    let of = |d: DatasetName| -> BTreeMap<&str, f64> {
        scores
            .iter()
            .filter(|s| s.dataset == d && s.metric == metric)
            .map(|s| (s.pair_id.as_str(), s.score))
            .collect()
    };
    let (a, b) = (of(reference), of(paraphrased));
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (id, v) in &a {
        if let Some(w) = b.get(id) {
            x.push(*v);
            y.push(*w);
        }
    }
    let mean = |d| summaries.iter().find(|s| s.dataset == d && s.metric == metric).map(|s| s.mean);
    let (rho, note) = match spearman_rho(&x, &y) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Correlation {
        metric,
        reference,
        paraphrased,
        n: x.len(),
        reference_mean: mean(reference),
        paraphrased_mean: mean(paraphrased),
        rho,
        note,
    }
}

pub fn run_experiment(
    corpus: &[EntityPairRecord],
    config: &RunConfig,
    backends: &Backends,
) -> Result<ExperimentOutcome, ExperimentError> {
    if config.datasets.is_empty() {
        return Err(ExperimentError::NoDatasets);
    }
    let metrics = backends
        .resolve_metrics(&config.metrics, &DEFAULT_METRICS)?;
    if metrics.is_empty() {
        return Err(ExperimentError::NoMetrics);
    }
    let options = ScoreOptions {
        decompose_baselines: config.decompose_baselines,
        ..ScoreOptions::default()
    };
    let mut errors = Vec::new();
    let mut corpus = corpus.to_vec();
    if backends.chat_is_live && needs_paraphrases(&config.datasets) {
        fill_paraphrases(&mut corpus, backends, config.workers, &mut errors);
    }

    // Datasets are built record by record so one bad record costs one pair.
    let ctx = BuildContext {
        chat: backends.chat.as_deref(),
        decomposition: &options.decomposition,
    };
    let mut built: Vec<(DatasetName, Vec<(DatasetPair, &EntityPairRecord)>)> = Vec::new();
    for &name in &config.datasets {
        let mut pairs = Vec::new();
        for record in &corpus {
            match build_dataset(std::slice::from_ref(record), name, ctx) {
                Ok(ds) => pairs.extend(ds.pairs.into_iter().map(|p| (p, record))),
                Err(e) => errors.push(ErrorEntry {
                    stage: "dataset".into(),
                    dataset: Some(name),
                    pair_id: Some(record.entity_pair_id.clone()),
                    metric: None,
                    message: e.to_string(),
                }),
            }
        }
        built.push((name, pairs));
    }

    let metric_list = &metrics;
    let tasks: Vec<Task<'_>> = built
        .iter()
        .flat_map(|(name, pairs)| {
            pairs.iter().flat_map(move |(pair, record)| {
                metric_list.iter().map(move |&metric| Task {
                    dataset: *name,
                    pair,
                    record,
                    metric,
                })
            })
        })
        .collect();
    let results = parallel_map(&tasks, config.workers, |t| {
        let common = t
            .record
            .first_annotator()
            .and_then(|a| t.record.summary(Side::ACommon, a));
        score_pair(&t.pair.left, &t.pair.right, common, t.metric, backends, &options)
    });

    let mut scores = Vec::new();
    let mut matrices = Vec::new();
    let mut universal = Vec::new();
    for (task, result) in tasks.iter().zip(results) {
        match result {
            Ok(scored) => {
                scores.push(PairScore {
                    dataset: task.dataset,
                    pair_id: task.pair.pair_id.clone(),
                    metric: task.metric,
                    score: scored.report.score,
                });
                if let Some(matrix) = scored.matrix {
                    universal.extend(
                        detect_universal_hypotheses(&matrix, UNIVERSAL_THRESHOLD)
                            .into_iter()
                            .filter(|h| h.opposing >= 2)
                            .map(|hypothesis| FlaggedHypothesis {
                                dataset: task.dataset,
                                pair_id: task.pair.pair_id.clone(),
                                hypothesis,
                            }),
                    );
                    if config.dump_matrix {
                        matrices.push(MatrixDump {
                            dataset: task.dataset,
                            pair_id: task.pair.pair_id.clone(),
                            matrix,
                        });
                    }
                }
            }
            Err(e) => errors.push(ErrorEntry {
                stage: "score".into(),
                dataset: Some(task.dataset),
                pair_id: Some(task.pair.pair_id.clone()),
                metric: Some(task.metric),
                message: e.to_string(),
            }),
        }
    }

    let mut summaries = Vec::new();
    for &name in &config.datasets {
        for &metric in &metrics {
            let samples: Vec<ScoreSample> = scores
                .iter()
                .filter(|s| s.dataset == name && s.metric == metric)
                .map(|s| ScoreSample::new(s.pair_id.clone(), s.score))
                .collect();
            if samples.is_empty() {
                continue;
            }
            let mean = samples.iter().map(|s| s.score).sum::<f64>() / samples.len() as f64;
            let bootstrap = if samples.len() >= 2 {
                match bootstrap_normal_ci(&samples, config.bootstrap_n, config.confidence, config.seed) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        errors.push(ErrorEntry {
                            stage: "bootstrap".into(),
                            dataset: Some(name),
                            pair_id: None,
                            metric: Some(metric),
                            message: e.to_string(),
                        });
                        None
                    }
                }
            } else {
                None
            };
            summaries.push(MetricSummary {
                dataset: name,
                metric,
                n: samples.len(),
                mean: bootstrap.as_ref().map_or(mean, |b| b.mean),
                bootstrap,
            });
        }
    }

    let ordering = metrics.iter().map(|&m| ordering_check(m, &summaries)).collect();
    let correlations = if config.datasets.contains(&DatasetName::ReferenceContrastive)
        && config.datasets.contains(&DatasetName::SyntheticContrast)
    {
        metrics.iter().map(|&m| correlation(m, &scores, &summaries)).collect()
    } else {
        Vec::new()
    };

    let mut identities = BTreeMap::new();
    if let Some(b) = &backends.nli {
        identities.insert("nli".to_string(), b.identity().to_string());
    }
    if let Some(b) = &backends.chat {
        identities.insert("chat".to_string(), b.identity().to_string());
    }
    if let Some(b) = &backends.embed {
        identities.insert("embed".to_string(), b.identity().to_string());
    }
    if backends.chat.is_some() {
        identities.insert("decompose_prompt_sha256".to_string(), options.decomposition.prompt_hash());
        identities.insert("decompose_parse".to_string(), contrast_core::decompose::PARSE_SCHEME.to_string());
    }

    Ok(ExperimentOutcome {
        report: ExperimentReport {
            seed: config.seed,
            n_resamples: config.bootstrap_n,
            confidence: config.confidence,
            datasets: config.datasets.clone(),
            metrics,
            decompose_baselines: config.decompose_baselines,
            backends: identities,
            scores,
            summaries,
            ordering,
            correlations,
            universal_hypotheses: universal,
            errors,
        },
        matrices,
    })
}
