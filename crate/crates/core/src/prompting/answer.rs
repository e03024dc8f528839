use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::template::{
    self, count_word, digit_choices, fill, letter_choices, render_with_frames, unlabeled_frames,
};
use super::PromptError;
use crate::frames::{FramePayload, Segment};
use crate::gateway::Part;

/// Prompt and answer format of the answering call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnswerDialect {
    /// Reason first, then `Final Answer: (X)` with a 1-based digit.
    #[default]
    DigitParen,
    /// Reply with the option letter only.
    BareLetter,
    OpenEnded,
}

impl FromStr for AnswerDialect {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "digit_paren" => Ok(Self::DigitParen),
            "bare_letter" => Ok(Self::BareLetter),
            "open_ended" => Ok(Self::OpenEnded),
            other => Err(PromptError::UnknownDialect(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsePath {
    FinalAnswerPattern,
    BareOption,
    /// Open-ended answer; the raw text is the answer.
    FreeText,
    Unparsed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOutput {
    /// 0-based option index.
    pub choice_index: Option<usize>,
    pub raw_text: String,
    pub parse_path: ParsePath,
}

impl AnswerOutput {
    pub fn unparsed(raw_text: impl Into<String>) -> Self {
        Self {
            choice_index: None,
            raw_text: raw_text.into(),
            parse_path: ParsePath::Unparsed,
        }
    }
}

/// Answering prompt over the context frames, which appear unlabelled in the
/// order given.
pub fn render_answer_prompt(
    frames: &[FramePayload],
    question: &str,
    options: &[String],
    dialect: AnswerDialect,
) -> Vec<Part> {
    let count = count_word(options.len());
    let images = unlabeled_frames(frames);
    match dialect {
        AnswerDialect::DigitParen => render_with_frames(
            template::ANSWER_DIGIT,
            &[
                ("choice_count", &count),
                ("question", question),
                ("choices", &digit_choices(options)),
            ],
            images,
        ),
        AnswerDialect::BareLetter => render_with_frames(
            template::ANSWER_LETTER,
            &[
                ("question", question),
                ("choices", &letter_choices(options)),
            ],
            images,
        ),
        AnswerDialect::OpenEnded => {
            render_with_frames(template::ANSWER_OPEN, &[("question", question)], images)
        }
    }
}

/// Per-segment answering prompt used by the independent-segments baseline.
pub fn render_segment_answer_prompt(
    frames: &[FramePayload],
    segment: &Segment,
    question: &str,
    options: &[String],
    high_confidence: bool,
) -> Vec<Part> {
    let confidence = if high_confidence {
        format!("{}\n", template::SEGMENT_CONFIDENCE.trim_end())
    } else {
        String::new()
    };
    render_with_frames(
        template::SEGMENT_ANSWER,
        &[
            ("choice_count", &count_word(options.len())),
            ("first", &segment.first.to_string()),
            ("last", &segment.last.to_string()),
            ("question", question),
            ("choices", &digit_choices(options)),
            ("confidence", &confidence),
        ],
        unlabeled_frames(frames),
    )
}

/// A segment's answer as passed to the aggregation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentAnswer {
    pub segment: Segment,
    pub text: String,
}

pub const NO_CONFIDENT_SEGMENTS: &str = "No segment produced a confident answer.";

pub fn render_aggregate_prompt(
    answers: &[SegmentAnswer],
    question: &str,
    options: &[String],
) -> Vec<Part> {
    let listing = if answers.is_empty() {
        NO_CONFIDENT_SEGMENTS.to_string()
    } else {
        answers
            .iter()
            .map(|a| {
                format!(
                    "Segment {} (frames {} to {}):\n{}",
                    a.segment.index,
                    a.segment.first,
                    a.segment.last,
                    a.text.trim()
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    vec![Part::text(fill(
        template::AGGREGATE,
        &[
            ("choice_count", &count_word(options.len())),
            ("question", question),
            ("choices", &digit_choices(options)),
            ("segment_answers", &listing),
        ],
    ))]
}

fn final_answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)final\s+answer\s*[:\-]?\s*\**\s*\(?\s*(?:(\d{1,3})|([a-z]))\b\s*\)?")
            .unwrap()
    })
}

fn bare_option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*\**\(?([A-Z]|\d{1,3})\)?\**(?:[.:)]\s.*|[.:)]?\s*)$").unwrap()
    })
}

/// Whether a segment answer explicitly declines to answer.
pub fn is_abstention(text: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)final\s+answer\s*:?\s*\(?\s*none\b").unwrap())
        .is_match(text)
}

/// 0-based index of an ASCII option letter. Case-insensitive regexes also
/// match look-alikes such as the Kelvin sign, so this must check.
fn letter_index(c: char) -> Option<usize> {
    c.is_ascii_alphabetic()
        .then(|| (c.to_ascii_uppercase() as u8 - b'A') as usize)
}

/// Extracts the chosen option.
///
/// Tries, in order: the last in-range `Final Answer: (X)` / `Final Answer: X`
/// (digits are 1-based, letters start at A); a bare option token on the last
/// non-empty line; otherwise unparsed.
pub fn parse_final_answer(text: &str, option_count: usize, dialect: AnswerDialect) -> AnswerOutput {
    if dialect == AnswerDialect::OpenEnded {
        return AnswerOutput {
            choice_index: None,
            raw_text: text.to_string(),
            parse_path: ParsePath::FreeText,
        };
    }
    let in_range = |i: usize| (i < option_count).then_some(i);

    let pattern_hit = final_answer_re()
        .captures_iter(text)
        .filter_map(|c| {
            if let Some(d) = c.get(1) {
                d.as_str()
                    .parse::<usize>()
                    .ok()
                    .and_then(|n| n.checked_sub(1))
                    .and_then(in_range)
            } else {
                c.get(2)
                    .and_then(|l| l.as_str().chars().next())
                    .and_then(letter_index)
                    .and_then(in_range)
            }
        })
        .last();
    if let Some(i) = pattern_hit {
        return AnswerOutput {
            choice_index: Some(i),
            raw_text: text.to_string(),
            parse_path: ParsePath::FinalAnswerPattern,
        };
    }

    let bare = text
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .and_then(|line| bare_option_re().captures(line))
        .and_then(|c| {
            let token = &c[1];
            match (dialect, token.parse::<usize>()) {
                (AnswerDialect::DigitParen, Ok(n)) => n.checked_sub(1),
                (AnswerDialect::BareLetter, Err(_)) => token.chars().next().and_then(letter_index),
                _ => None,
            }
        })
        .and_then(in_range);
    match bare {
        Some(i) => AnswerOutput {
            choice_index: Some(i),
            raw_text: text.to_string(),
            parse_path: ParsePath::BareOption,
        },
        None => AnswerOutput::unparsed(text),
    }
}
