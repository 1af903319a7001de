//! Prompt-corpus generation and evaluation for LLM-backed sequential
//! recommendation.
//!
//! Raw Amazon review logs go through [`ingest`] (dedupe, k-core, sequences),
//! [`split`] (display IDs, leave-one-out), [`sample_gen`] (prompt corpora for
//! seven task families) and come back as predictions scored by [`metrics`].
//! [`models`] holds reference recommenders that exercise the same file
//! formats, and [`pipeline`] wires the stages behind the `recprompt` binary.

pub mod artifact;
pub mod config;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod prompt;
pub mod sample_gen;
pub mod seed;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
