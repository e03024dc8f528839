use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::frames::TokenBudget;
use crate::prompting::{AnswerDialect, CaptionStyle};

/// Every implemented inference strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Answer over `k` uniformly sampled frames.
    Baseline,
    SingleStep,
    DynamicSegment,
    Hierarchical,
    SelfConsistency,
    SimilarityFrames,
    SimilarityCaptions,
    CaptionSelectConcise,
    CaptionSelectLong,
    IndependentSegments,
    /// Independent segments that may abstain when unsure.
    IndependentSegmentsHc,
    /// Caption-similarity retrieval over a 64-frame pool.
    VideoAgent,
}

impl Strategy {
    pub const ALL: [Strategy; 12] = [
        Strategy::Baseline,
        Strategy::SingleStep,
        Strategy::DynamicSegment,
        Strategy::Hierarchical,
        Strategy::SelfConsistency,
        Strategy::SimilarityFrames,
        Strategy::SimilarityCaptions,
        Strategy::CaptionSelectConcise,
        Strategy::CaptionSelectLong,
        Strategy::IndependentSegments,
        Strategy::IndependentSegmentsHc,
        Strategy::VideoAgent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::SingleStep => "single-step",
            Strategy::DynamicSegment => "dynamic-segment",
            Strategy::Hierarchical => "hierarchical",
            Strategy::SelfConsistency => "self-consistency",
            Strategy::SimilarityFrames => "similarity-frames",
            Strategy::SimilarityCaptions => "similarity-captions",
            Strategy::CaptionSelectConcise => "caption-select-concise",
            Strategy::CaptionSelectLong => "caption-select-long",
            Strategy::IndependentSegments => "independent-segments",
            Strategy::IndependentSegmentsHc => "independent-segments-hc",
            Strategy::VideoAgent => "video-agent",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL
            .iter()
            .map(|s| s.name())
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn needs_embedder(self) -> bool {
        matches!(
            self,
            Strategy::SimilarityFrames | Strategy::SimilarityCaptions | Strategy::VideoAgent
        )
    }

    /// Whether the strategy makes frame-selection decisions.
    pub fn selects(self) -> bool {
        !matches!(
            self,
            Strategy::Baseline
                | Strategy::SelfConsistency
                | Strategy::IndependentSegments
                | Strategy::IndependentSegmentsHc
        )
    }

    pub(crate) fn caption_style(self) -> Option<CaptionStyle> {
        match self {
            Strategy::CaptionSelectConcise => Some(CaptionStyle::Concise),
            Strategy::CaptionSelectLong => Some(CaptionStyle::Long),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

/// Pool size of the `video-agent` preset.
pub const VIDEO_AGENT_POOL: u32 = 64;

/// Knobs shared by all strategies. Field aliases accept the short symbols
/// (`u`, `l`, `s`, `v`, `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Token budget; yields the frame budget `k`.
    pub budget: TokenBudget,
    /// Uniform frames added to every curated context.
    #[serde(alias = "u")]
    pub uniform_frames: u32,
    #[serde(alias = "l")]
    pub segments: u32,
    /// Frames presented per segment selection call; also the window length
    /// of the independent-segments strategies.
    #[serde(alias = "s")]
    pub frames_per_segment: u32,
    /// Hierarchical neighbourhood radius.
    #[serde(alias = "v")]
    pub neighborhood_radius: u32,
    /// Hierarchical iteration cap.
    #[serde(alias = "t")]
    pub max_iterations: u32,
    pub n_votes: u32,
    pub sc_temperature: f64,
    pub rng_seed: u64,
    /// Candidate pool of the similarity strategies; `segments *
    /// frames_per_segment` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity_pool: Option<u32>,
    pub answer_dialect: AnswerDialect,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Concurrent calls within one question.
    pub parallelism: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            budget: TokenBudget::default(),
            uniform_frames: 0,
            segments: 12,
            frames_per_segment: 64,
            neighborhood_radius: 8,
            max_iterations: 3,
            n_votes: 9,
            sc_temperature: 0.7,
            rng_seed: 0,
            similarity_pool: None,
            answer_dialect: AnswerDialect::DigitParen,
            temperature: 0.0,
            max_output_tokens: 1024,
            parallelism: 4,
        }
    }
}

impl StrategyConfig {
    /// Checks the invariants and returns the frame budget `k`.
    pub fn validate(&self) -> Result<u32, StrategyError> {
        let k = self.budget.frame_budget()?;
        let bad = |msg: String| Err(StrategyError::InvalidConfig(msg));
        if self.uniform_frames > k {
            return bad(format!(
                "uniform_frames {} exceeds the frame budget {k}",
                self.uniform_frames
            ));
        }
        if self.segments == 0 || self.frames_per_segment == 0 {
            return bad("segments and frames_per_segment must be at least 1".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if self.n_votes == 0 || self.n_votes % 2 == 0 {
            return bad(format!(
                "n_votes must be odd and at least 1, got {}",
                self.n_votes
            ));
        }
        if !(self.sc_temperature >= 0.0 && self.temperature >= 0.0) {
            return bad("temperatures must be non-negative".into());
        }
        if self.similarity_pool == Some(0) {
            return bad("similarity_pool must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        Ok(k)
    }

    pub fn frame_budget(&self) -> Result<u32, StrategyError> {
        self.validate()
    }

    pub(crate) fn pool_size(&self, strategy: Strategy) -> u32 {
        match strategy {
            Strategy::VideoAgent => VIDEO_AGENT_POOL,
            _ => self
                .similarity_pool
                .unwrap_or(self.segments.saturating_mul(self.frames_per_segment)),
        }
    }
}
