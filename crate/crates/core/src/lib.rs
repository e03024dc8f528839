//! Temporal chain-of-thought question answering over long videos.
//!
//! A vision-language model first picks the frames relevant to a question,
//! then answers from that curated context. Modules, bottom up:
//!
//! - [`frames`]: frame ids, sampling, token budgets, on-disk frame stores.
//! - [`gateway`]: chat and embedding backends, caching, retries, the mock VLM.
//! - [`prompting`]: prompt templates and robust response parsing.
//! - [`similarity`]: embeddings and cosine ranking, generic over the float type.
//! - [`strategies`]: the inference pipelines and their run traces.
//! - [`eval`]: datasets, scoring, and cost and selection analyses.
//! - [`app`]: experiment configs, runs, synthetic benchmarks and reports.

pub mod app;
pub mod eval;
pub mod frames;
pub mod gateway;
pub mod prompting;
pub mod similarity;
pub mod strategies;

pub use frames::FrameId;

/// Embedding with `f64` components.
pub type Embedding = similarity::Embedding<f64>;
/// Embedding with `f32` components.
pub type Embedding32 = similarity::Embedding<f32>;
