//! Std companion of `contrast-core`: HTTP backends, the response cache,
//! corpus files, experiment reports and the `contrast-eval` command line.

pub mod backends;
pub mod cache;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod experiment;
pub mod fixtures;
pub mod http;
pub mod report;
pub mod scoring;

pub use backends::Backends;
pub use cache::{CachedChat, CachedEmbedding, CachedNli, ResponseCache};
pub use cli::{cmd_convert_corpus, cmd_decompose, cmd_experiment, cmd_score, Cli};
pub use config::RunConfig;
pub use corpus::{convert_cocotrip, load_corpus, parse_corpus};
pub use experiment::{run_experiment, ExperimentOutcome, ExperimentReport};
pub use http::{HttpChat, HttpEmbedding, HttpNli, HttpSettings, RetryPolicy};
