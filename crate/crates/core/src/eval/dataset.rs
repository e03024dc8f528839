use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One question about one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QARecord {
    pub question_id: String,
    pub video_id: String,
    pub question: String,
    /// Empty for open-ended questions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// 0-based index of the correct option.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
    /// Annotated evidence intervals, in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_spans: Option<Vec<[f64; 2]>>,
}

impl QARecord {
    pub fn is_mcq(&self) -> bool {
        !self.options.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.question_id.is_empty() || self.video_id.is_empty() {
            return Err("question_id and video_id must be non-empty".into());
        }
        if self.is_mcq() {
            if !(2..=5).contains(&self.options.len()) {
                return Err(format!(
                    "multiple choice needs 2-5 options, got {}",
                    self.options.len()
                ));
            }
            match self.answer_index {
                Some(i) if i < self.options.len() => {}
                Some(i) => {
                    return Err(format!(
                        "answer_index {i} out of range for {} options",
                        self.options.len()
                    ))
                }
                None => return Err("multiple-choice record needs answer_index".into()),
            }
        } else if self.answer_text.is_none() {
            return Err("open-ended record needs answer_text".into());
        }
        if let Some(spans) = &self.reference_spans {
            for [start, end] in spans {
                if !(start.is_finite() && end.is_finite() && 0.0 <= *start && start <= end) {
                    return Err(format!(
                        "reference span [{start}, {end}] must satisfy 0 <= start <= end"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses JSONL dataset text. Every bad line is reported, with 1-based line
/// numbers; blank lines are skipped.
pub fn parse_dataset(text: &str) -> Result<Vec<QARecord>, Vec<LineError>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: QARecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                errors.push(LineError {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if let Err(message) = record.validate() {
            errors.push(LineError {
                line: line_no,
                message,
            });
            continue;
        }
        if !seen.insert(record.question_id.clone()) {
            errors.push(LineError {
                line: line_no,
                message: format!("duplicate question_id '{}'", record.question_id),
            });
            continue;
        }
        records.push(record);
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(errors)
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<QARecord>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_dataset(&text).map_err(|errors| EvalError::Schema {
        path: path.to_path_buf(),
        errors,
    })
}
