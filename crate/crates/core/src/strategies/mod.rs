//! Inference strategies: each maps a video and a question to an answer plus
//! a [`RunTrace`] recording every call.
//!
//! The frame-selecting strategies curate a context of at most `k` frames
//! before answering; the others (uniform baseline, self-consistency,
//! independent segments) are comparison points.

mod config;
mod parallel;
mod pipeline;
mod trace;
mod vote;

use thiserror::Error;

pub use config::{Strategy, StrategyConfig, VIDEO_AGENT_POOL};
pub use parallel::ordered_map;
pub use pipeline::Pipeline;
pub use trace::{CallRecord, JudgeRecord, RunTrace, SelectionRecord, TraceTotals, TRACE_SCHEMA};
pub use vote::{majority_vote, vote_seed, VoteTally};

use crate::frames::FrameError;
use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unknown strategy '{name}'; valid strategies: {valid}")]
    UnknownStrategy { name: String, valid: String },
    #[error("invalid strategy config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Frames(#[from] FrameError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("strategy {0} needs an embedding backend")]
    MissingEmbedder(Strategy),
    #[error("strategy {strategy} cannot answer this question: {reason}")]
    Unsupported { strategy: Strategy, reason: String },
    #[error("frame store holds video '{found}' but the question is about '{expected}'")]
    VideoMismatch { expected: String, found: String },
    #[error("answer call would present {presented} frames, over the budget of {k}")]
    BudgetViolation { presented: usize, k: u32 },
}
