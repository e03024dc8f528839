use serde::{Deserialize, Serialize};

use super::config::StrategyConfig;
use crate::frames::{ContextSet, FrameId, Provenance};
use crate::gateway::{estimate_text_tokens, CallRole, ChatRequest, ChatResponse};
use crate::prompting::{AnswerOutput, JudgeScore, RepairFlags};

pub const TRACE_SCHEMA: u32 = 1;

/// Selection outcome attached to a select call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub frame_ids: Vec<FrameId>,
    pub justification: String,
    pub repaired: RepairFlags,
}

/// One logical VLM call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: CallRole,
    /// 1-based segment, iteration or vote index, where meaningful.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<u32>,
    /// Frames shown as images or captions.
    pub presented: Vec<FrameId>,
    pub visual_tokens: u64,
    pub text_tokens: u64,
    /// Text tokens were estimated from character counts.
    pub text_tokens_estimated: bool,
    pub cache_hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
    /// Set when the call failed after retries; failed calls carry no tokens.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CallRecord {
    pub(crate) fn completed(
        req: &ChatRequest,
        resp: &ChatResponse,
        cache_hit: bool,
        tokens_per_frame: u32,
        presented: Vec<FrameId>,
        segment: Option<u32>,
    ) -> Self {
        let visual_tokens = req.image_count() as u64 * u64::from(tokens_per_frame);
        let prompt = resp
            .usage
            .prompt_tokens
            .map(|p| p.saturating_sub(visual_tokens));
        let completion = resp.usage.completion_tokens;
        let estimated = prompt.is_none() || completion.is_none();
        let text_tokens = prompt.unwrap_or_else(|| estimate_text_tokens(req.text_chars()))
            + completion.unwrap_or_else(|| estimate_text_tokens(resp.text.chars().count()));
        Self {
            role: req.meta.role,
            segment,
            presented,
            visual_tokens,
            text_tokens,
            text_tokens_estimated: estimated,
            cache_hit,
            selection: None,
            error: None,
        }
    }

    pub(crate) fn failed(
        role: CallRole,
        presented: Vec<FrameId>,
        segment: Option<u32>,
        error: String,
    ) -> Self {
        Self {
            role,
            segment,
            presented,
            visual_tokens: 0,
            text_tokens: 0,
            text_tokens_estimated: false,
            cache_hit: false,
            selection: None,
            error: Some(error),
        }
    }

    pub fn tokens(&self) -> u64 {
        self.visual_tokens + self.text_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceTotals {
    /// Largest single-call input plus output.
    pub context_tokens_max: u64,
    pub total_tokens: u64,
    pub visual_tokens: u64,
}

impl TraceTotals {
    pub fn from_calls(calls: &[CallRecord]) -> Self {
        calls.iter().fold(Self::default(), |acc, c| Self {
            context_tokens_max: acc.context_tokens_max.max(c.tokens()),
            total_tokens: acc.total_tokens + c.tokens(),
            visual_tokens: acc.visual_tokens + c.visual_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRecord {
    pub score: JudgeScore,
    pub call: CallRecord,
}

/// Everything one strategy run did for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub trace_schema: u32,
    pub question_id: String,
    pub video_id: String,
    pub strategy: String,
    pub params: StrategyConfig,
    pub frame_count: u32,
    pub calls: Vec<CallRecord>,
    /// Selected frames before refinement to the budget; `None` for
    /// strategies that do not select.
    pub selected_ids_initial: Option<Vec<FrameId>>,
    /// Frames presented to selection, counted once each.
    pub selection_pool_size: Option<u32>,
    pub final_context: ContextSet,
    pub answer: AnswerOutput,
    /// Parsed vote of each self-consistency run, `None` when unparsed or
    /// failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<Option<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeRecord>,
    pub totals: TraceTotals,
}

impl RunTrace {
    /// Recomputes the totals from the recorded calls.
    pub fn recomputed_totals(&self) -> TraceTotals {
        TraceTotals::from_calls(&self.calls)
    }

    pub fn calls_with(&self, role: CallRole) -> impl Iterator<Item = &CallRecord> {
        self.calls.iter().filter(move |c| c.role == role)
    }

    pub fn failed_calls(&self) -> usize {
        self.calls.iter().filter(|c| c.error.is_some()).count()
    }

    /// Checks the structural invariants every trace must satisfy.
    pub fn check_invariants(&self, budget_k: u32) -> Result<(), String> {
        if self.totals != self.recomputed_totals() {
            return Err(format!(
                "totals {:?} differ from recomputation {:?}",
                self.totals,
                self.recomputed_totals()
            ));
        }
        if self.final_context.len() > budget_k as usize {
            return Err(format!(
                "context of {} frames exceeds k = {budget_k}",
                self.final_context.len()
            ));
        }
        for call in self.calls.iter().filter(|c| c.role.is_answering()) {
            if call.presented.len() > budget_k as usize {
                return Err(format!(
                    "{} call presents {} frames, over k = {budget_k}",
                    call.role.as_str(),
                    call.presented.len()
                ));
            }
        }
        if let Some(initial) = &self.selected_ids_initial {
            let missing: Vec<FrameId> = self
                .final_context
                .ids_with(Provenance::Selected)
                .into_iter()
                .filter(|id| initial.binary_search(id).is_err())
                .collect();
            if !missing.is_empty() {
                return Err(format!(
                    "selected context frames {missing:?} were never selected"
                ));
            }
        }
        Ok(())
    }
}
