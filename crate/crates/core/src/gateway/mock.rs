//! Scripted, fully deterministic stand-in for a VLM.
//!
//! A [`MockScript`] maps questions, videos, or a default scope to one
//! [`MockMode`] per call role. The mock reads the prompt the way a model
//! would: it sees `FrameID i:` labels and the frames after them, and answers
//! in terms of those labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::hash::hash_request;
use super::request::{CallRole, ChatRequest, ChatResponse, Part};
use super::{ChatBackend, GatewayError};
use crate::frames::FrameId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MockMode {
    /// Returns the labels of presented items whose frame is relevant.
    OracleSelect {
        relevant_ids: Vec<FrameId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        caption_keyword: Option<String>,
    },
    /// Oracle selection with seeded false positives and false negatives.
    NoisySelect {
        relevant_ids: Vec<FrameId>,
        fp_rate: f64,
        fn_rate: f64,
        rng_seed: u64,
    },
    /// Emits unparseable text with the given probability, otherwise behaves
    /// like `oracle_select` over `relevant_ids`.
    MalformedJson {
        probability: f64,
        rng_seed: u64,
        #[serde(default)]
        relevant_ids: Vec<FrameId>,
    },
    /// Answers `correct_idx` when enough of the needle is visible, otherwise
    /// `distractor_idx`. Indices are 0-based.
    NeedleAnswer {
        relevant_ids: Vec<FrameId>,
        required_fraction: f64,
        correct_idx: usize,
        distractor_idx: usize,
        /// Reply `Final Answer: (none)` instead of the distractor when no
        /// needle frame is shown.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        abstain_when_absent: bool,
    },
    /// Echoes fixed text. `{frame_id}` expands to the first presented frame.
    FixedText { text: String },
    /// Repeats the first concrete `Final Answer: (X)` found in the prompt.
    EchoAnswer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<String>,
    },
}

/// One mode per call role; unset roles fall through to broader scopes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockRoutes {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<MockMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<MockMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caption: Option<MockMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge: Option<MockMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vote: Option<MockMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_answer: Option<MockMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<MockMode>,
}

impl MockRoutes {
    fn get(&self, role: CallRole) -> Option<&MockMode> {
        match role {
            CallRole::Select => self.select.as_ref(),
            CallRole::Answer => self.answer.as_ref(),
            CallRole::Caption => self.caption.as_ref(),
            CallRole::Judge => self.judge.as_ref(),
            CallRole::Vote => self.vote.as_ref(),
            CallRole::SegmentAnswer => self.segment_answer.as_ref(),
            CallRole::Aggregate => self.aggregate.as_ref(),
        }
    }
}

/// The JSON mock-script file: routes by question id, then video id, then
/// `default`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub default: MockRoutes,
    pub videos: BTreeMap<String, MockRoutes>,
    pub questions: BTreeMap<String, MockRoutes>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Mock(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Mock(format!("{}: {e}", path.display())))
    }

    /// Every role resolves to the same mode.
    pub fn uniform(mode: MockMode) -> Self {
        Self {
            default: MockRoutes {
                select: Some(mode.clone()),
                answer: Some(mode.clone()),
                caption: Some(mode.clone()),
                judge: Some(mode.clone()),
                aggregate: Some(mode),
                ..MockRoutes::default()
            },
            ..Self::default()
        }
    }

    pub fn resolve(
        &self,
        role: CallRole,
        video_id: Option<&str>,
        question_id: Option<&str>,
    ) -> Option<&MockMode> {
        let chain: Vec<CallRole> = match role {
            CallRole::Vote | CallRole::SegmentAnswer => vec![role, CallRole::Answer],
            _ => vec![role],
        };
        let scopes = [
            question_id.and_then(|q| self.questions.get(q)),
            video_id.and_then(|v| self.videos.get(v)),
            Some(&self.default),
        ];
        scopes
            .into_iter()
            .flatten()
            .find_map(|routes| chain.iter().find_map(|&r| routes.get(r)))
    }
}

/// An item the model can point at: a labelled frame or caption.
#[derive(Debug, Clone)]
struct Presented {
    label: u64,
    frame_id: FrameId,
    caption: Option<String>,
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"FrameID\s+(\d+)\s*:\s*$").unwrap())
}

fn leading_label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*FrameID\s+(\d+)\s*:").unwrap())
}

fn final_answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Final Answer:\s*\(([0-9]+|[A-Za-z])\)").unwrap())
}

fn presented_items(req: &ChatRequest) -> Vec<Presented> {
    let mut pending: Option<u64> = None;
    let mut out = Vec::new();
    for part in &req.parts {
        match part {
            Part::Image(img) => {
                let label = pending.take().unwrap_or(out.len() as u64 + 1);
                out.push(Presented {
                    label,
                    frame_id: img.frame_id,
                    caption: None,
                });
            }
            Part::Text {
                text,
                frame_id: Some(id),
            } => {
                let label = leading_label_re()
                    .captures(text)
                    .and_then(|c| c[1].parse().ok())
                    .or_else(|| pending.take())
                    .unwrap_or(out.len() as u64 + 1);
                out.push(Presented {
                    label,
                    frame_id: *id,
                    caption: Some(text.clone()),
                });
            }
            Part::Text {
                text,
                frame_id: None,
            } => {
                pending = label_re().captures(text).and_then(|c| c[1].parse().ok());
            }
        }
    }
    out
}

fn selection_json(labels: &[u64], total: usize) -> String {
    let justification = if labels.is_empty() {
        "None of the frames show the event asked about.".to_string()
    } else {
        format!(
            "{} of the {total} frames show the event asked about.",
            labels.len()
        )
    };
    serde_json::json!({ "frame_ids": labels, "justification": justification }).to_string()
}

fn request_seed(req: &ChatRequest, seed: u64) -> u64 {
    let key = hash_request(req);
    let prefix = u64::from_str_radix(&key[..16], 16).unwrap_or(0);
    prefix ^ seed
}

const GARBAGE: [&str; 4] = [
    "I think the answer is B",
    "Frames 3 and 4 look relevant.",
    "```json\n{\"frame_ids\": [1, 2,\n```",
    "{'frame_ids': oops}",
];

/// Produces the response a mode scripts for `req`.
pub fn respond(mode: &MockMode, req: &ChatRequest) -> String {
    match mode {
        MockMode::OracleSelect {
            relevant_ids,
            caption_keyword,
        } => {
            let relevant: BTreeSet<FrameId> = relevant_ids.iter().copied().collect();
            let items = presented_items(req);
            let mut labels: Vec<u64> = items
                .iter()
                .filter(|it| {
                    relevant.contains(&it.frame_id)
                        || matches!((&it.caption, caption_keyword), (Some(c), Some(k)) if c.contains(k.as_str()))
                })
                .map(|it| it.label)
                .collect();
            labels.sort_unstable();
            labels.dedup();
            selection_json(&labels, items.len())
        }
        MockMode::NoisySelect {
            relevant_ids,
            fp_rate,
            fn_rate,
            rng_seed,
        } => {
            let relevant: BTreeSet<FrameId> = relevant_ids.iter().copied().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(request_seed(req, *rng_seed));
            let items = presented_items(req);
            let mut labels: Vec<u64> = items
                .iter()
                .filter(|it| {
                    let draw: f64 = rng.random();
                    if relevant.contains(&it.frame_id) {
                        draw >= *fn_rate
                    } else {
                        draw < *fp_rate
                    }
                })
                .map(|it| it.label)
                .collect();
            labels.sort_unstable();
            labels.dedup();
            selection_json(&labels, items.len())
        }
        MockMode::MalformedJson {
            probability,
            rng_seed,
            relevant_ids,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(request_seed(req, *rng_seed));
            let draw: f64 = rng.random();
            if draw < *probability {
                GARBAGE[rng.random_range(0..GARBAGE.len())].to_string()
            } else {
                respond(
                    &MockMode::OracleSelect {
                        relevant_ids: relevant_ids.clone(),
                        caption_keyword: None,
                    },
                    req,
                )
            }
        }
        MockMode::NeedleAnswer {
            relevant_ids,
            required_fraction,
            correct_idx,
            distractor_idx,
            abstain_when_absent,
        } => {
            let relevant: BTreeSet<FrameId> = relevant_ids.iter().copied().collect();
            let shown: BTreeSet<FrameId> = req.image_ids().into_iter().collect();
            let hits = shown.intersection(&relevant).count();
            let fraction = if relevant.is_empty() {
                0.0
            } else {
                hits as f64 / relevant.len() as f64
            };
            if hits == 0 && *abstain_when_absent {
                return "None of these frames show the moment in question.\nFinal Answer: (none)"
                    .to_string();
            }
            let choice = if !relevant.is_empty() && fraction >= *required_fraction {
                *correct_idx
            } else {
                *distractor_idx
            };
            if req.text().contains("option's letter") {
                char::from(b'A' + (choice % 26) as u8).to_string()
            } else {
                format!(
                    "Looking at the frames, {hits} show the moment in question.\nFinal Answer: ({})",
                    choice + 1
                )
            }
        }
        MockMode::FixedText { text } => {
            let first = presented_items(req)
                .first()
                .map(|p| p.frame_id)
                .unwrap_or(0);
            text.replace("{frame_id}", &first.to_string())
        }
        MockMode::EchoAnswer { fallback } => {
            let text = req.text();
            final_answer_re()
                .captures_iter(&text)
                .map(|c| c[1].to_string())
                .find(|x| x != "X")
                .map(|x| format!("Final Answer: ({x})"))
                .unwrap_or_else(|| {
                    fallback
                        .clone()
                        .unwrap_or_else(|| "Final Answer: (1)".to_string())
                })
        }
    }
}

/// Backend that answers from a [`MockScript`].
#[derive(Debug, Default)]
pub struct MockBackend {
    script: MockScript,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        Self::new(MockScript::uniform(MockMode::FixedText {
            text: text.into(),
        }))
    }

    /// Number of completed backend invocations.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mode = self
            .script
            .resolve(
                req.meta.role,
                req.meta.video_id.as_deref(),
                req.meta.question_id.as_deref(),
            )
            .ok_or_else(|| {
                GatewayError::Mock(format!(
                    "no scripted mode for role '{}' (video {:?}, question {:?})",
                    req.meta.role.as_str(),
                    req.meta.video_id,
                    req.meta.question_id
                ))
            })?;
        Ok(ChatResponse::text_only(respond(mode, req)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FramePayload;

    fn image(id: FrameId) -> Part {
        Part::Image(FramePayload {
            frame_id: id,
            bytes: vec![id as u8, 1, 2].into(),
        })
    }

    fn labelled(ids: &[FrameId], labels: &[u64]) -> ChatRequest {
        let mut parts = vec![Part::text("Frames follow.\n")];
        for (id, l) in ids.iter().zip(labels) {
            parts.push(Part::text(format!("FrameID {l}:")));
            parts.push(image(*id));
        }
        ChatRequest::new("mock", CallRole::Select, parts)
    }

    #[test]
    fn oracle_select_intersects_labels() {
        let mode = MockMode::OracleSelect {
            relevant_ids: vec![7, 40],
            caption_keyword: None,
        };
        let out = respond(&mode, &labelled(&[3, 7, 9], &[3, 7, 9]));
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["frame_ids"], serde_json::json!([7]));
        assert!(v["justification"].is_string());

        let out = respond(&mode, &labelled(&[3, 7, 9], &[1, 2, 3]));
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["frame_ids"], serde_json::json!([2]));
    }

    #[test]
    fn fixed_text_echo() {
        let req = ChatRequest::new("m", CallRole::Answer, vec![Part::text("q")]);
        assert_eq!(
            respond(
                &MockMode::FixedText {
                    text: "Final Answer: (2)".into()
                },
                &req
            ),
            "Final Answer: (2)"
        );
        let req = ChatRequest::new(
            "m",
            CallRole::Caption,
            vec![image(12), Part::text("describe")],
        );
        assert_eq!(
            respond(
                &MockMode::FixedText {
                    text: "frame {frame_id}".into()
                },
                &req
            ),
            "frame 12"
        );
    }

    #[test]
    fn needle_answer_threshold() {
        let mode = MockMode::NeedleAnswer {
            relevant_ids: vec![10, 11, 12, 13, 14],
            required_fraction: 0.2,
            correct_idx: 2,
            distractor_idx: 3,
            abstain_when_absent: false,
        };
        let hit = ChatRequest::new(
            "m",
            CallRole::Answer,
            vec![image(1), image(12), Part::text("q")],
        );
        assert!(respond(&mode, &hit).ends_with("Final Answer: (3)"));
        let miss = ChatRequest::new(
            "m",
            CallRole::Answer,
            vec![image(1), image(20), Part::text("q")],
        );
        assert!(respond(&mode, &miss).ends_with("Final Answer: (4)"));
        let letter = ChatRequest::new(
            "m",
            CallRole::Answer,
            vec![
                image(12),
                Part::text("Answer with the option's letter from the given choices"),
            ],
        );
        assert_eq!(respond(&mode, &letter), "C");

        let abstaining = MockMode::NeedleAnswer {
            relevant_ids: vec![10],
            required_fraction: 1.0,
            correct_idx: 0,
            distractor_idx: 1,
            abstain_when_absent: true,
        };
        assert!(respond(&abstaining, &miss).ends_with("Final Answer: (none)"));
    }

    #[test]
    fn modes_are_deterministic() {
        let req = labelled(&(1..=50).collect::<Vec<_>>(), &(1..=50).collect::<Vec<_>>());
        let noisy = MockMode::NoisySelect {
            relevant_ids: (10..20).collect(),
            fp_rate: 0.1,
            fn_rate: 0.3,
            rng_seed: 5,
        };
        assert_eq!(respond(&noisy, &req), respond(&noisy, &req));
        let bad = MockMode::MalformedJson {
            probability: 1.0,
            rng_seed: 9,
            relevant_ids: vec![],
        };
        let out = respond(&bad, &req);
        assert_eq!(out, respond(&bad, &req));
        assert!(GARBAGE.contains(&out.as_str()));
    }

    #[test]
    fn echo_skips_instruction_placeholder() {
        let req = ChatRequest::new(
            "m",
            CallRole::Aggregate,
            vec![Part::text(
                "Segment 3: the cup is red. Final Answer: (2)\nOutput \"Final Answer: (X)\" where X is the digit.",
            )],
        );
        assert_eq!(
            respond(&MockMode::EchoAnswer { fallback: None }, &req),
            "Final Answer: (2)"
        );
    }

    #[test]
    fn script_resolution_order() {
        let mut script = MockScript::uniform(MockMode::FixedText { text: "d".into() });
        script.videos.insert(
            "v".into(),
            MockRoutes {
                answer: Some(MockMode::FixedText { text: "v".into() }),
                ..MockRoutes::default()
            },
        );
        script.questions.insert(
            "q".into(),
            MockRoutes {
                select: Some(MockMode::FixedText { text: "q".into() }),
                ..MockRoutes::default()
            },
        );
        let text = |m: Option<&MockMode>| match m {
            Some(MockMode::FixedText { text }) => text.clone(),
            _ => String::new(),
        };
        assert_eq!(
            text(script.resolve(CallRole::Select, Some("v"), Some("q"))),
            "q"
        );
        assert_eq!(
            text(script.resolve(CallRole::Answer, Some("v"), Some("q"))),
            "v"
        );
        assert_eq!(
            text(script.resolve(CallRole::Vote, Some("v"), Some("q"))),
            "v"
        );
        assert_eq!(
            text(script.resolve(CallRole::Caption, Some("v"), Some("q"))),
            "d"
        );
        assert_eq!(text(script.resolve(CallRole::Answer, None, None)), "d");
    }

    #[test]
    fn script_json_shape() {
        let json = r#"{"questions": {"q1": {"select": {"mode": "oracle_select", "relevant_ids": [5]},
            "answer": {"mode": "needle_answer", "relevant_ids": [5], "required_fraction": 0.2, "correct_idx": 1, "distractor_idx": 0}}}}"#;
        let script: MockScript = serde_json::from_str(json).unwrap();
        assert!(script.resolve(CallRole::Select, None, Some("q1")).is_some());
        assert!(script
            .resolve(CallRole::Caption, None, Some("q1"))
            .is_none());
    }
}
