use serde::{Deserialize, Serialize};

use super::FrameError;

/// Token budget of one VLM call, from which the frame budget `k` derives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenBudget {
    pub context_token_limit: u32,
    pub tokens_per_frame: u32,
    /// Tokens held back for the question, options and instructions.
    pub question_reserve_tokens: u32,
}

impl Default for TokenBudget {
    /// 32K context at 258 tokens per frame; the 1808-token reserve leaves
    /// exactly 120 frames.
    fn default() -> Self {
        Self {
            context_token_limit: 32_768,
            tokens_per_frame: 258,
            question_reserve_tokens: 1_808,
        }
    }
}

impl TokenBudget {
    pub fn new(
        context_token_limit: u32,
        tokens_per_frame: u32,
        question_reserve_tokens: u32,
    ) -> Self {
        Self {
            context_token_limit,
            tokens_per_frame,
            question_reserve_tokens,
        }
    }

    /// `floor((limit - reserve) / tokens_per_frame)`, which must be at least 1.
    pub fn frame_budget(&self) -> Result<u32, FrameError> {
        if self.tokens_per_frame == 0 || self.question_reserve_tokens >= self.context_token_limit {
            return Err(FrameError::BudgetTooSmall(*self));
        }
        let k = (self.context_token_limit - self.question_reserve_tokens) / self.tokens_per_frame;
        if k < 1 {
            return Err(FrameError::BudgetTooSmall(*self));
        }
        Ok(k)
    }

    pub fn visual_tokens(&self, frames: usize) -> u64 {
        frames as u64 * u64::from(self.tokens_per_frame)
    }
}

/// Free-function form of [`TokenBudget::frame_budget`].
pub fn frames_for_budget(budget: &TokenBudget) -> Result<u32, FrameError> {
    budget.frame_budget()
}
