use serde::{Deserialize, Serialize};

use crate::frames::{FrameId, FramePayload};

/// What a VLM call is for. Carried as routing metadata; never part of the
/// cache key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    Select,
    Answer,
    Caption,
    Judge,
    Vote,
    SegmentAnswer,
    Aggregate,
}

impl CallRole {
    pub fn as_str(self) -> &'static str {
        match self {
            CallRole::Select => "select",
            CallRole::Answer => "answer",
            CallRole::Caption => "caption",
            CallRole::Judge => "judge",
            CallRole::Vote => "vote",
            CallRole::SegmentAnswer => "segment_answer",
            CallRole::Aggregate => "aggregate",
        }
    }

    /// Roles whose call produces an answer from frames.
    pub fn is_answering(self) -> bool {
        matches!(
            self,
            CallRole::Answer | CallRole::Vote | CallRole::SegmentAnswer
        )
    }
}

/// One element of a multimodal prompt.
#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    /// Prompt text. `frame_id` is set when the text stands in for a frame,
    /// as with captions.
    Text {
        text: String,
        frame_id: Option<FrameId>,
    },
    Image(FramePayload),
}

impl Part {
    pub fn text(text: impl Into<String>) -> Self {
        Part::Text {
            text: text.into(),
            frame_id: None,
        }
    }

    pub fn caption(text: impl Into<String>, frame_id: FrameId) -> Self {
        Part::Text {
            text: text.into(),
            frame_id: Some(frame_id),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Part::Text { text, .. } => Some(text),
            Part::Image(_) => None,
        }
    }
}

/// Routing metadata for mocks and logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestMeta {
    pub role: CallRole,
    pub video_id: Option<String>,
    pub question_id: Option<String>,
}

impl RequestMeta {
    pub fn new(role: CallRole) -> Self {
        Self {
            role,
            video_id: None,
            question_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub parts: Vec<Part>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub seed: Option<u64>,
    pub meta: RequestMeta,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, role: CallRole, parts: Vec<Part>) -> Self {
        Self {
            model_id: model_id.into(),
            parts,
            temperature: 0.0,
            max_output_tokens: 1024,
            seed: None,
            meta: RequestMeta::new(role),
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn for_question(mut self, video_id: &str, question_id: &str) -> Self {
        self.meta.video_id = Some(video_id.to_string());
        self.meta.question_id = Some(question_id.to_string());
        self
    }

    pub fn image_ids(&self) -> Vec<FrameId> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Image(f) => Some(f.frame_id),
                Part::Text { .. } => None,
            })
            .collect()
    }

    pub fn image_count(&self) -> usize {
        self.parts
            .iter()
            .filter(|p| matches!(p, Part::Image(_)))
            .count()
    }

    /// All text parts concatenated in order.
    pub fn text(&self) -> String {
        self.parts.iter().filter_map(Part::as_text).collect()
    }

    pub fn text_chars(&self) -> usize {
        self.parts
            .iter()
            .filter_map(Part::as_text)
            .map(|t| t.chars().count())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
    #[serde(default)]
    pub backend_latency_ms: u64,
}

impl ChatResponse {
    pub fn text_only(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: Usage::default(),
            backend_latency_ms: 0,
        }
    }
}

/// Token estimate for text without backend-reported usage: `ceil(chars / 4)`.
pub fn estimate_text_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}
