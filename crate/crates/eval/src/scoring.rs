//! Scoring one summary pair with one metric, and a bounded worker pool.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use contrast_core::lexical::SummarySet;
use contrast_core::{
    bs_inverse, caspr_detailed, decompose_summary, ds_multi, ds_pairwise, ComparisonMatrix, DecompositionConfig, Error,
    MetricKind, MetricReport, Summary,
};

use crate::backends::Backends;

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub report: MetricReport,
    /// The comparison matrix, for CASPR only.
    pub matrix: Option<ComparisonMatrix>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreOptions {
    pub decomposition: DecompositionConfig,
    /// Run the lexical and embedding metrics on decomposed summaries too.
    pub decompose_baselines: bool,
}

fn missing_backend(what: &str) -> Error {
    Error::InvalidRequest(format!("no {what} backend configured"))
}

fn baseline_input(summary: &Summary, backends: &Backends, options: &ScoreOptions) -> Result<Summary, Error> {
    if !options.decompose_baselines {
        return Ok(summary.clone());
    }
    let chat = backends.chat.as_deref().ok_or_else(|| missing_backend("chat"))?;
    Ok(decompose_summary(summary, chat, &options.decomposition)?.to_summary())
}

/// Scores `left` against `right`. `common` is only read by the
/// three-summary lexical score.
pub fn score_pair(
    left: &Summary,
    right: &Summary,
    common: Option<&Summary>,
    metric: MetricKind,
    backends: &Backends,
    options: &ScoreOptions,
) -> Result<Scored, Error> {
    let plain = |report| Scored { report, matrix: None };
    match metric {
        MetricKind::Caspr => {
            let nli = backends.nli.as_deref().ok_or_else(|| missing_backend("NLI"))?;
            let chat = backends.chat.as_deref().ok_or_else(|| missing_backend("chat"))?;
            let outcome = caspr_detailed(left, right, nli, chat, &options.decomposition)?;
            Ok(Scored {
                report: outcome.report,
                matrix: Some(outcome.matrix),
            })
        }
        MetricKind::Ds => {
            let (l, r) = (baseline_input(left, backends, options)?, baseline_input(right, backends, options)?);
            ds_pairwise(&l, &r).map(plain)
        }
        MetricKind::DsMulti => {
            let common = common.ok_or(Error::Arity { expected: 3, actual: 2 })?;
            let members = [left, right, common]
                .into_iter()
                .map(|s| baseline_input(s, backends, options))
                .collect::<Result<Vec<_>, _>>()?;
            ds_multi(&SummarySet::new(members)?).map(plain)
        }
        MetricKind::BsInv => {
            let embed = backends.embed.as_deref().ok_or_else(|| missing_backend("embedding"))?;
            let (l, r) = (baseline_input(left, backends, options)?, baseline_input(right, backends, options)?);
            bs_inverse(&l, &r, embed).map(plain)
        }
    }
}

/// Applies `f` to every item on at most `workers` threads. Results keep the
/// input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}
