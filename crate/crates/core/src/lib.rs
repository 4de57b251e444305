//! Lexical mind-perception measurement for human-AI chat and its association
//! with companionship topics in forum posts.
//!
//! Stages, in pipeline order:
//! - [`corpus`]: JSONL ingestion, normalization and post/chat linkage;
//! - [`lexicon`]: MP lexicon matching and contextual validation;
//! - [`topics`]: weighted topic coding and parameter search;
//! - [`discovery`]: log-odds indicator discovery with stability and holdout gates;
//! - [`mpscore`]: latent scores, prevalence-matched thresholds, composite signals;
//! - [`stats`]: overlap/concentration summaries, Wilson intervals, robust logit;
//! - [`pipeline`]: config-driven orchestration and report emission.

pub mod corpus;
pub mod discovery;
pub mod error;
pub mod lexicon;
pub mod matcher;
pub mod mpscore;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod topics;

pub use error::{Error, Result};
