#![allow(dead_code)]

pub mod fuzz;
pub mod oracle;

use std::sync::Arc;

use tcot_core::eval::QARecord;
use tcot_core::frames::{ContextSet, Provenance};
use tcot_core::gateway::{
    CallRole, Gateway, MockBackend, MockMode, MockRoutes, MockScript, ResponseCache,
};
use tcot_core::prompting::{AnswerOutput, ParsePath};
use tcot_core::strategies::{CallRecord, RunTrace, StrategyConfig, TraceTotals, TRACE_SCHEMA};
use tcot_core::FrameId;

pub const OPTIONS: [&str; 4] = ["a red ball", "a blue cube", "a green cone", "a yellow ring"];

pub fn mcq(question_id: &str, video_id: &str, answer: usize) -> QARecord {
    QARecord {
        question_id: question_id.into(),
        video_id: video_id.into(),
        question: "What object appears in the highlighted moment?".into(),
        options: OPTIONS.iter().map(|s| s.to_string()).collect(),
        answer_index: Some(answer),
        answer_text: None,
        question_type: None,
        reference_spans: None,
    }
}

pub fn open_ended(question_id: &str, video_id: &str, answer: &str) -> QARecord {
    QARecord {
        question_id: question_id.into(),
        video_id: video_id.into(),
        question: "What is on the table?".into(),
        options: Vec::new(),
        answer_index: None,
        answer_text: Some(answer.into()),
        question_type: None,
        reference_spans: None,
    }
}

/// Oracle selection plus a needle-aware answerer over `relevant`.
pub fn needle_routes(relevant: &[FrameId], correct: usize, distractor: usize) -> MockRoutes {
    MockRoutes {
        select: Some(MockMode::OracleSelect {
            relevant_ids: relevant.to_vec(),
            caption_keyword: None,
        }),
        answer: Some(MockMode::NeedleAnswer {
            relevant_ids: relevant.to_vec(),
            required_fraction: 0.2,
            correct_idx: correct,
            distractor_idx: distractor,
            abstain_when_absent: false,
        }),
        caption: Some(MockMode::FixedText {
            text: "A plain frame, number {frame_id}.".into(),
        }),
        aggregate: Some(MockMode::EchoAnswer { fallback: None }),
        ..MockRoutes::default()
    }
}

pub fn script(routes: MockRoutes) -> MockScript {
    MockScript {
        default: routes,
        ..MockScript::default()
    }
}

pub fn gateway(script: MockScript) -> Gateway {
    Gateway::new(Arc::new(MockBackend::new(script)))
}

pub fn cached_gateway(script: MockScript) -> Gateway {
    gateway(script).with_cache(ResponseCache::in_memory())
}

/// A hand-built trace with one answer call of `tokens` text tokens.
pub fn trace(
    question_id: &str,
    choice: Option<usize>,
    selected: Option<Vec<FrameId>>,
    tokens: u64,
) -> RunTrace {
    let pool = selected.as_ref().map(|_| 768);
    let context = ContextSet::tagged(selected.as_deref().unwrap_or(&[]), Provenance::Selected);
    let calls = vec![CallRecord {
        role: CallRole::Answer,
        segment: None,
        presented: context.frame_ids(),
        visual_tokens: 0,
        text_tokens: tokens,
        text_tokens_estimated: false,
        cache_hit: false,
        selection: None,
        error: None,
    }];
    RunTrace {
        trace_schema: TRACE_SCHEMA,
        question_id: question_id.into(),
        video_id: "vid".into(),
        strategy: "dynamic-segment".into(),
        params: StrategyConfig::default(),
        frame_count: 2040,
        totals: TraceTotals::from_calls(&calls),
        calls,
        selected_ids_initial: selected,
        selection_pool_size: pool,
        final_context: context,
        answer: AnswerOutput {
            choice_index: choice,
            raw_text: String::new(),
            parse_path: if choice.is_some() {
                ParsePath::FinalAnswerPattern
            } else {
                ParsePath::Unparsed
            },
        },
        votes: None,
        judge: None,
    }
}
