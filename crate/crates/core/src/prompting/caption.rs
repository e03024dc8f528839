use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::template;
use super::PromptError;
use crate::frames::FramePayload;
use crate::gateway::Part;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionStyle {
    Concise,
    Long,
}

impl FromStr for CaptionStyle {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concise" => Ok(Self::Concise),
            "long" => Ok(Self::Long),
            other => Err(PromptError::UnknownStyle(other.to_string())),
        }
    }
}

impl fmt::Display for CaptionStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptionStyle::Concise => "concise",
            CaptionStyle::Long => "long",
        })
    }
}

pub fn render_caption_prompt(style: CaptionStyle) -> &'static str {
    match style {
        CaptionStyle::Concise => template::CAPTION_CONCISE,
        CaptionStyle::Long => template::CAPTION_LONG,
    }
}

/// The captioning call for one frame: the image followed by the instruction.
pub fn caption_request_parts(frame: &FramePayload, style: CaptionStyle) -> Vec<Part> {
    vec![
        Part::Image(frame.clone()),
        Part::text(render_caption_prompt(style)),
    ]
}
