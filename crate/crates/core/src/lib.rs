//! Deterministic evaluation harness for bilingual (English/Japanese)
//! multiple-choice medical question-answering benchmarks.
//!
//! The pipeline: load canonical JSONL datasets, render prompt templates,
//! drive an OpenAI-compatible endpoint with caching and bounded
//! concurrency, score the responses with exact-match and gestalt
//! accuracy, and aggregate the results into score and delta tables.

pub mod cli;
pub mod config;
pub mod convert;
pub mod ingest;
pub mod inference;
pub mod metrics;
pub mod prompt;
pub mod report;

/// Scalar type used for similarities, accuracies, and table cells.
pub type Real = f64;

pub use ingest::{BenchmarkManifest, Language, QaRecord};
pub use metrics::{judge, ExtractionPolicy, ItemJudgment};
pub use prompt::{RenderedPrompt, TemplateKind, TemplateSet};
