//! Prompt rendering and response parsing for every VLM call.
//!
//! Prompt texts live under `prompts/` in this crate and are compiled in.
//! Parsers never fail on model output: selection falls back to all presented
//! frames and answers degrade to "unparsed".

mod answer;
mod caption;
mod judge;
mod selection;
pub mod template;

use thiserror::Error;

pub use answer::{
    is_abstention, parse_final_answer, render_aggregate_prompt, render_answer_prompt,
    render_segment_answer_prompt, AnswerDialect, AnswerOutput, ParsePath, SegmentAnswer,
    NO_CONFIDENT_SEGMENTS,
};
pub use caption::{caption_request_parts, render_caption_prompt, CaptionStyle};
pub use judge::{mean_normalized, parse_judge_score, JudgeScore};
pub use selection::{
    parse_selection_response, render_caption_selection_prompt, render_selection_prompt, LocalIdMap,
    RepairFlags, SelectionOutput,
};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown caption style '{0}' (expected concise or long)")]
    UnknownStyle(String),
    #[error("unknown answer dialect '{0}' (expected digit_paren, bare_letter or open_ended)")]
    UnknownDialect(String),
    #[error("no score between 1 and 5 in judge reply: {0:?}")]
    JudgeParseFailure(String),
    #[error("judge template is missing the {{{0}}} placeholder")]
    TemplatePlaceholder(String),
}
