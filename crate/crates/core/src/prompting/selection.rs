//! The frame-selection call: prompt rendering and response parsing.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::template::{self, count_word, digit_choices, render_with_frames};
use crate::frames::{FrameId, FramePayload};
use crate::gateway::Part;

/// Translates the 1-based labels shown in a selection prompt back to global
/// frame ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LocalIdMap {
    presented: Vec<FrameId>,
}

impl LocalIdMap {
    pub fn new(presented: Vec<FrameId>) -> Self {
        Self { presented }
    }

    pub fn global(&self, local: i64) -> Option<FrameId> {
        if local < 1 {
            return None;
        }
        self.presented.get(local as usize - 1).copied()
    }

    pub fn presented(&self) -> &[FrameId] {
        &self.presented
    }

    pub fn len(&self) -> usize {
        self.presented.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presented.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairFlags {
    pub sorted: bool,
    pub deduped: bool,
    pub clamped: bool,
    pub fallback_all: bool,
    pub empty: bool,
}

/// Frames picked by a selection call, as ascending global ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionOutput {
    pub frame_ids: Vec<FrameId>,
    pub justification: String,
    pub repaired: RepairFlags,
}

impl SelectionOutput {
    /// Every presented frame; used whenever a response cannot be parsed.
    pub fn fallback_all(map: &LocalIdMap) -> Self {
        let mut ids = map.presented().to_vec();
        ids.sort_unstable();
        ids.dedup();
        Self {
            frame_ids: ids,
            justification: String::new(),
            repaired: RepairFlags {
                fallback_all: true,
                ..RepairFlags::default()
            },
        }
    }
}

fn header_and_choices(question: &str, options: &[String]) -> (&'static str, String, String) {
    if options.is_empty() {
        (
            template::SELECTION_OPEN,
            String::new(),
            question.to_string(),
        )
    } else {
        (
            template::SELECTION,
            digit_choices(options),
            question.to_string(),
        )
    }
}

fn labelled(frames: Vec<Part>) -> Vec<Part> {
    let mut parts = Vec::with_capacity(frames.len() * 2);
    for (i, f) in frames.into_iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        parts.push(Part::text(format!("{sep}FrameID {}:", i + 1)));
        parts.push(f);
    }
    parts
}

/// Selection prompt over image frames, labelled `FrameID 1..n` in the order
/// given. Returns the parts and the label-to-frame map.
pub fn render_selection_prompt(
    frames: &[FramePayload],
    question: &str,
    options: &[String],
) -> (Vec<Part>, LocalIdMap) {
    let (tpl, choices, question) = header_and_choices(question, options);
    let count = count_word(options.len());
    let images = frames.iter().cloned().map(Part::Image).collect();
    let parts = render_with_frames(
        tpl,
        &[
            ("choice_count", &count),
            ("question", &question),
            ("choices", &choices),
        ],
        labelled(images),
    );
    let map = LocalIdMap::new(frames.iter().map(|f| f.frame_id).collect());
    (parts, map)
}

/// Selection prompt where each frame is replaced by its caption, one
/// `FrameID i: <caption>` line per frame.
pub fn render_caption_selection_prompt(
    captions: &[(FrameId, String)],
    question: &str,
    options: &[String],
) -> (Vec<Part>, LocalIdMap) {
    let (tpl, choices, question) = header_and_choices(question, options);
    let count = count_word(options.len());
    let lines = captions
        .iter()
        .enumerate()
        .map(|(i, (id, caption))| {
            let caption = caption.replace('\n', " ");
            Part::caption(format!("FrameID {}: {}\n", i + 1, caption.trim()), *id)
        })
        .collect();
    let parts = render_with_frames(
        tpl,
        &[
            ("choice_count", &count),
            ("question", &question),
            ("choices", &choices),
        ],
        lines,
    );
    let map = LocalIdMap::new(captions.iter().map(|(id, _)| *id).collect());
    (parts, map)
}

const MAX_CANDIDATES: usize = 64;

/// The balanced `{...}` span opening at byte `start`, ignoring braces inside
/// quotes.
fn balanced_object(text: &str, start: usize) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == q {
                quote = None;
            }
            continue;
        }
        match b {
            b'"' | b'\'' => quote = Some(b),
            b'{' => depth += 1,
            b'}' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return text.get(start..=i);
                }
            }
            _ => {}
        }
    }
    None
}

fn strict_object(text: &str, start: usize) -> Option<serde_json::Map<String, Value>> {
    let slice = text.get(start..)?;
    let mut stream = serde_json::Deserializer::from_str(slice).into_iter::<Value>();
    match stream.next() {
        Some(Ok(Value::Object(map))) => Some(map),
        _ => None,
    }
}

fn lenient_object(text: &str, start: usize) -> Option<serde_json::Map<String, Value>> {
    let candidate = balanced_object(text, start)?;
    let swapped: String = candidate
        .chars()
        .map(|c| if c == '\'' { '"' } else { c })
        .collect();
    match serde_json::from_str::<Value>(&swapped) {
        Ok(Value::Object(map)) => Some(map),
        _ => None,
    }
}

/// The first JSON object in `text` carrying a `frame_ids` key. Tolerates code
/// fences, surrounding prose and single-quoted keys.
fn extract_selection_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    let starts: Vec<usize> = text
        .match_indices('{')
        .map(|(i, _)| i)
        .take(MAX_CANDIDATES)
        .collect();
    for &i in &starts {
        if let Some(obj) = strict_object(text, i).filter(|o| o.contains_key("frame_ids")) {
            return Some(obj);
        }
    }
    for &i in &starts {
        if let Some(obj) = lenient_object(text, i).filter(|o| o.contains_key("frame_ids")) {
            return Some(obj);
        }
    }
    None
}

fn as_integer(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_u64().map(|u| u.min(i64::MAX as u64) as i64))
            .or_else(|| {
                n.as_f64()
                    .filter(|f| f.fract() == 0.0 && f.abs() < 1e15)
                    .map(|f| f as i64)
            }),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Parses a selection response into ascending global ids.
///
/// Mildly malformed lists are repaired: ids are sorted, duplicates dropped,
/// and labels outside `1..=n` discarded. A response without a parseable
/// `frame_ids` list selects every presented frame. An empty list stays empty.
pub fn parse_selection_response(text: &str, map: &LocalIdMap) -> SelectionOutput {
    let Some(obj) = extract_selection_object(text) else {
        tracing::debug!(
            "selection response has no JSON frame list; selecting all presented frames"
        );
        return SelectionOutput::fallback_all(map);
    };
    let Some(Value::Array(raw)) = obj.get("frame_ids") else {
        return SelectionOutput::fallback_all(map);
    };
    let Some(locals) = raw.iter().map(as_integer).collect::<Option<Vec<i64>>>() else {
        return SelectionOutput::fallback_all(map);
    };
    let justification = match obj.get("justification") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };

    let mut flags = RepairFlags::default();
    let in_range: Vec<i64> = locals
        .iter()
        .copied()
        .filter(|&l| map.global(l).is_some())
        .collect();
    flags.clamped = in_range.len() != locals.len();
    flags.sorted = in_range.windows(2).any(|w| w[0] > w[1]);
    let mut globals: Vec<FrameId> = in_range.iter().filter_map(|&l| map.global(l)).collect();
    globals.sort_unstable();
    let before = globals.len();
    globals.dedup();
    flags.deduped = globals.len() != before;
    flags.empty = globals.is_empty();
    SelectionOutput {
        frame_ids: globals,
        justification,
        repaired: flags,
    }
}
