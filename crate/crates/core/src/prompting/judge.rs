use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PromptError;

/// A 1-5 judge rating and its 0-100 normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub raw: u8,
    pub normalized: f64,
}

impl JudgeScore {
    pub fn from_raw(raw: u8) -> Result<Self, PromptError> {
        if !(1..=5).contains(&raw) {
            return Err(PromptError::JudgeParseFailure(raw.to_string()));
        }
        Ok(Self {
            raw,
            normalized: f64::from(raw - 1) / 4.0 * 100.0,
        })
    }
}

/// Reads the first integer in `1..=5` from a judge reply.
pub fn parse_judge_score(text: &str) -> Result<JudgeScore, PromptError> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\d+").unwrap());
    re.find_iter(text)
        .filter_map(|m| m.as_str().parse::<u8>().ok())
        .find(|n| (1..=5).contains(n))
        .ok_or_else(|| PromptError::JudgeParseFailure(text.to_string()))
        .and_then(JudgeScore::from_raw)
}

/// Mean of normalised scores; `None` for an empty slice.
pub fn mean_normalized(scores: &[JudgeScore]) -> Option<f64> {
    (!scores.is_empty())
        .then(|| scores.iter().map(|s| s.normalized).sum::<f64>() / scores.len() as f64)
}
