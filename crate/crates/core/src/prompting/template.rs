use std::sync::OnceLock;

use regex::Regex;

use crate::frames::FramePayload;
use crate::gateway::Part;

pub const SELECTION: &str = include_str!("../../prompts/selection.txt");
pub const SELECTION_OPEN: &str = include_str!("../../prompts/selection_open.txt");
pub const ANSWER_DIGIT: &str = include_str!("../../prompts/answer_digit.txt");
pub const ANSWER_LETTER: &str = include_str!("../../prompts/answer_letter.txt");
pub const ANSWER_OPEN: &str = include_str!("../../prompts/answer_open.txt");
pub const CAPTION_CONCISE: &str = include_str!("../../prompts/caption_concise.txt");
pub const CAPTION_LONG: &str = include_str!("../../prompts/caption_long.txt");
pub const SEGMENT_ANSWER: &str = include_str!("../../prompts/segment_answer.txt");
pub const SEGMENT_CONFIDENCE: &str = include_str!("../../prompts/segment_confidence.txt");
pub const AGGREGATE: &str = include_str!("../../prompts/aggregate.txt");
/// Default judge template; not part of any published protocol.
pub const JUDGE: &str = include_str!("../../prompts/judge.txt");

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

/// Single-pass `{name}` substitution; unknown names are left in place, and
/// substituted values are never re-expanded.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    placeholder_re()
        .replace_all(template, |c: &regex::Captures<'_>| {
            vars.iter()
                .find(|(k, _)| *k == &c[1])
                .map(|(_, v)| v.to_string())
                .unwrap_or_else(|| c[0].to_string())
        })
        .into_owned()
}

pub fn placeholders(template: &str) -> Vec<String> {
    placeholder_re()
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .collect()
}

/// Renders a template whose `{frames}` slot expands to multimodal parts.
pub fn render_with_frames(template: &str, vars: &[(&str, &str)], frames: Vec<Part>) -> Vec<Part> {
    let (head, tail) = template.split_once("{frames}").unwrap_or((template, ""));
    let mut parts = Vec::with_capacity(frames.len() + 2);
    let head = fill(head, vars);
    if !head.is_empty() {
        parts.push(Part::text(head));
    }
    parts.extend(frames);
    let tail = fill(tail, vars);
    if !tail.is_empty() {
        parts.push(Part::text(tail));
    }
    parts
}

/// `{frame1}, ..., {frameN}`: images separated by commas, no labels.
pub fn unlabeled_frames(frames: &[FramePayload]) -> Vec<Part> {
    let mut parts = Vec::with_capacity(frames.len() * 2);
    for (i, f) in frames.iter().enumerate() {
        if i > 0 {
            parts.push(Part::text(", "));
        }
        parts.push(Part::Image(f.clone()));
    }
    parts
}

pub fn count_word(n: usize) -> String {
    match n {
        1 => "one".into(),
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        5 => "five".into(),
        6 => "six".into(),
        n => n.to_string(),
    }
}

/// `(1) first\n(2) second ...`
pub fn digit_choices(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("({}) {o}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// `(A) first\n(B) second ...`
pub fn letter_choices(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("({}) {o}", char::from(b'A' + (i % 26) as u8)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Flattens parts to text, writing images as `<frame N>`. Used for golden
/// files and logs.
pub fn flatten(parts: &[Part]) -> String {
    parts
        .iter()
        .map(|p| match p {
            Part::Text { text, .. } => text.clone(),
            Part::Image(img) => format!("<frame {}>", img.frame_id),
        })
        .collect()
}
