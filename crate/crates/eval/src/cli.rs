//! Command-line interface: argument parsing, the four subcommands and
//! their exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use contrast_core::{
    decompose_summary, DecomposedSummary, DecompositionConfig, MetricKind, MetricReport, Side, Summary,
};
use serde::Serialize;

use crate::backends::Backends;
use crate::config::{parse_datasets, parse_metrics, ConfigError, RunConfig};
use crate::corpus::{convert_cocotrip, corpus_to_jsonl, load_corpus, ConvertError, CorpusError};
use crate::experiment::{run_experiment, ExperimentError, ExperimentOutcome, DEFAULT_METRICS};
use crate::report::{display_int, markdown, matrix_csv, write_atomic, write_reports};
use crate::scoring::{parallel_map, score_pair, ScoreOptions};

pub mod exit {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    /// Reports were written but some operations failed.
    pub const PARTIAL: i32 = 4;
    pub const DECOMPOSE: i32 = 5;
    pub const CASPR: i32 = 10;
    pub const DS: i32 = 11;
    pub const DS_MULTI: i32 = 12;
    pub const BS_INV: i32 = 13;
}

pub fn metric_exit_code(metric: MetricKind) -> i32 {
    match metric {
        MetricKind::Caspr => exit::CASPR,
        MetricKind::Ds => exit::DS,
        MetricKind::DsMulti => exit::DS_MULTI,
        MetricKind::BsInv => exit::BS_INV,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("convert: {0}")]
    Convert(#[from] ConvertError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", metric.display_name())]
    Metric {
        metric: MetricKind,
        #[source]
        source: contrast_core::Error,
    },
    #[error("pair {pair_id} {side}/{annotator}: {source}")]
    Decompose {
        pair_id: String,
        side: Side,
        annotator: String,
        #[source]
        source: contrast_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Corpus(_) | CliError::Convert(_) => exit::INPUT,
            CliError::Io { .. } => exit::RUNTIME,
            CliError::Metric { metric, .. } => metric_exit_code(*metric),
            CliError::Decompose { .. } => exit::DECOMPOSE,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => CliError::Config(c),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "contrast-eval", version, about = "Contrastiveness metrics for paired opinion summaries")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub nli_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub nli_model: Option<String>,
    #[arg(long, global = true)]
    pub embed_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub embed_model: Option<String>,
    #[arg(long, global = true)]
    pub chat_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub chat_model: Option<String>,
    /// Directory of the read-through response cache.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Directory with nli_rules.json, chat.json and embed.json.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Comma-separated: caspr, ds, ds_multi, bs_inv [default: all with backends]
    #[arg(long, global = true)]
    pub metrics: Option<String>,
    /// Bootstrap resamples [default: 10000]
    #[arg(long, global = true)]
    pub bootstrap_n: Option<usize>,
    /// Confidence level of the bootstrap interval [default: 0.95]
    #[arg(long, global = true)]
    pub confidence: Option<f64>,
    /// Seed for all randomness [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Concurrently scored pairs [default: 4]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Also emit the CASPR comparison matrices.
    #[arg(long, global = true)]
    pub dump_matrix: bool,
    /// Score DS and BS_inv on decomposed summaries as well.
    #[arg(long, global = true)]
    pub decompose_baselines: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose every summary of a corpus into single-claim sentences.
    Decompose {
        corpus: PathBuf,
        /// Output JSONL file [default: stdout]
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score one pair of summaries, given as text or as file paths.
    Score {
        left: String,
        right: String,
        /// Common summary, needed by ds_multi.
        #[arg(long)]
        common: Option<String>,
    },
    /// Build the datasets from a corpus, score them and write reports.
    Experiment {
        corpus: PathBuf,
        /// Comma-separated dataset names [default: all five]
        #[arg(long)]
        datasets: Option<String>,
        /// Report directory [default: contrast-report]
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Convert CoCoTrip-style JSON into the corpus JSONL schema.
    ConvertCorpus {
        input: PathBuf,
        /// Output JSONL file [default: stdout]
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl GlobalArgs {
    /// The run configuration: file values (if any) with flags on top.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let set = |slot: &mut Option<String>, v: &Option<String>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        set(&mut c.nli.endpoint, &self.nli_endpoint);
        set(&mut c.nli.model, &self.nli_model);
        set(&mut c.embed.endpoint, &self.embed_endpoint);
        set(&mut c.embed.model, &self.embed_model);
        set(&mut c.chat.endpoint, &self.chat_endpoint);
        set(&mut c.chat.model, &self.chat_model);
        if self.cache_dir.is_some() {
            c.cache_dir.clone_from(&self.cache_dir);
        }
        if self.fixtures.is_some() {
            c.fixtures.clone_from(&self.fixtures);
        }
        if let Some(m) = &self.metrics {
            c.metrics = parse_metrics(m)?;
        }
        if let Some(n) = self.bootstrap_n {
            c.bootstrap_n = n;
        }
        if let Some(v) = self.confidence {
            c.confidence = v;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        c.dump_matrix |= self.dump_matrix;
        c.decompose_baselines |= self.decompose_baselines;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct DecomposedRecord<'a> {
    entity_pair_id: &'a str,
    chat_backend: &'a str,
    prompt_sha256: String,
    parse: &'a str,
    summaries: Vec<DecomposedSummary>,
}

/// Decomposes every summary of the corpus; returns the number of records.
pub fn cmd_decompose(
    corpus: &Path,
    output: Option<&Path>,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<usize, CliError> {
    let backends = Backends::from_config(config)?;
    let chat = backends.require_chat()?;
    let records = load_corpus(corpus)?;
    let decomposition = DecompositionConfig::default();
    let results = parallel_map(&records, config.workers, |r| {
        r.summaries
            .iter()
            .map(|s| {
                decompose_summary(s, chat, &decomposition).map_err(|source| CliError::Decompose {
                    pair_id: r.entity_pair_id.clone(),
                    side: s.side,
                    annotator: s.annotator_id.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    });
    let mut text = String::new();
    for (record, result) in records.iter().zip(results) {
        let line = DecomposedRecord {
            entity_pair_id: &record.entity_pair_id,
            chat_backend: chat.identity(),
            prompt_sha256: decomposition.prompt_hash(),
            parse: contrast_core::decompose::PARSE_SCHEME,
            summaries: result?,
        };
        text.push_str(&serde_json::to_string(&line).expect("decomposed records serialize"));
        text.push('\n');
    }
    emit(output, &text, out)?;
    Ok(records.len())
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(io_err(path)),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

/// A file path if one exists with that name, else literal text.
pub fn read_text_or_file(arg: &str) -> Result<String, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(io_err(path))
    } else {
        Ok(arg.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreOutput {
    #[serde(flatten)]
    pub report: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_csv: Option<String>,
}

pub fn cmd_score(
    left: &str,
    right: &str,
    common: Option<&str>,
    config: &RunConfig,
    json: bool,
    out: &mut dyn Write,
) -> Result<Vec<ScoreOutput>, CliError> {
    let backends = Backends::from_config(config)?;
    let mut default_set = DEFAULT_METRICS.to_vec();
    if common.is_some() {
        default_set.push(MetricKind::DsMulti);
    }
    let metrics = backends.resolve_metrics(&config.metrics, &default_set)?;
    if metrics.contains(&MetricKind::DsMulti) && common.is_none() {
        return Err(CliError::Usage("ds_multi needs --common".into()));
    }
    if config.decompose_baselines && backends.chat.is_none() {
        return Err(ConfigError::Invalid("--decompose-baselines needs a chat backend".into()).into());
    }
    let summary = |side, arg: &str| -> Result<Summary, CliError> {
        let text = read_text_or_file(arg)?;
        if text.trim().is_empty() {
            return Err(CliError::Usage(format!("{side} summary is empty")));
        }
        Ok(Summary::from_text(side, "cli", "1", &text))
    };
    let l = summary(Side::AMinusB, left)?;
    let r = summary(Side::BMinusA, right)?;
    let c = common.map(|c| summary(Side::ACommon, c)).transpose()?;
    let options = ScoreOptions {
        decompose_baselines: config.decompose_baselines,
        ..ScoreOptions::default()
    };
    let mut outputs = Vec::new();
    for metric in metrics {
        let scored = score_pair(&l, &r, c.as_ref(), metric, &backends, &options)
            .map_err(|source| CliError::Metric { metric, source })?;
        outputs.push(ScoreOutput {
            report: scored.report,
            matrix_csv: scored.matrix.as_ref().filter(|_| config.dump_matrix).map(matrix_csv),
        });
    }
    if json {
        let text = serde_json::to_string_pretty(&outputs).expect("reports serialize");
        writeln!(out, "{text}").map_err(stdout_err)?;
    } else {
        let mut text = String::new();
        for o in &outputs {
            text.push_str(&format!("{}\t{}\n", o.report.metric.display_name(), display_int(o.report.score)));
            if let Some(m) = &o.matrix_csv {
                text.push_str(m);
            }
        }
        out.write_all(text.as_bytes()).map_err(stdout_err)?;
    }
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub outcome: ExperimentOutcome,
    pub files: Vec<PathBuf>,
}

impl ExperimentRun {
    pub fn exit_code(&self) -> i32 {
        if self.outcome.report.errors.is_empty() {
            exit::OK
        } else {
            exit::PARTIAL
        }
    }
}

/// Runs the experiment and writes the report files into `config.out_dir`.
pub fn cmd_experiment(corpus: &Path, config: &RunConfig, json: bool, out: &mut dyn Write) -> Result<ExperimentRun, CliError> {
    if config.datasets.is_empty() {
        return Err(CliError::Usage("no datasets selected".into()));
    }
    let backends = Backends::from_config(config)?;
    let records = load_corpus(corpus)?;
    let outcome = run_experiment(&records, config, &backends)?;
    let files = write_reports(&outcome, &config.out_dir).map_err(io_err(&config.out_dir))?;
    if json {
        let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
        writeln!(out, "{text}").map_err(stdout_err)?;
    } else {
        out.write_all(markdown(&outcome.report).as_bytes()).map_err(stdout_err)?;
        writeln!(out, "\nreports written to {}", config.out_dir.display()).map_err(stdout_err)?;
    }
    Ok(ExperimentRun { outcome, files })
}

pub fn cmd_convert_corpus(input: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<usize, CliError> {
    let text = std::fs::read_to_string(input).map_err(io_err(input))?;
    let records = convert_cocotrip(&text)?;
    emit(output, &corpus_to_jsonl(&records), out)?;
    Ok(records.len())
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| -> Result<i32, CliError> {
        let Cli { global, command } = cli;
        match command {
            Command::ConvertCorpus { input, output } => {
                cmd_convert_corpus(&input, output.as_deref(), out)?;
                Ok(exit::OK)
            }
            Command::Decompose { corpus, output } => {
                let config = global.run_config()?;
                cmd_decompose(&corpus, output.as_deref(), &config, out)?;
                Ok(exit::OK)
            }
            Command::Score { left, right, common } => {
                let config = global.run_config()?;
                cmd_score(&left, &right, common.as_deref(), &config, global.json, out)?;
                Ok(exit::OK)
            }
            Command::Experiment {
                corpus,
                datasets,
                out_dir,
            } => {
                let mut config = global.run_config()?;
                if let Some(d) = datasets {
                    config.datasets = parse_datasets(&d)?;
                }
                if let Some(dir) = out_dir {
                    config.out_dir = dir;
                }
                let run = cmd_experiment(&corpus, &config, global.json, out)?;
                for e in &run.outcome.report.errors {
                    let _ = writeln!(err, "error: {}: {}", e.stage, e.message);
                }
                Ok(run.exit_code())
            }
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

