use super::{EvalError, QARecord};
use crate::gateway::{CallRole, ChatRequest, Gateway, Part};
use crate::prompting::{parse_judge_score, template, PromptError};
use crate::strategies::{CallRecord, JudgeRecord, RunTrace};

const JUDGE_PLACEHOLDERS: [&str; 3] = ["question", "answer", "prediction"];

/// Checks that a judge template has the `{question}`, `{answer}` and
/// `{prediction}` slots.
pub fn validate_judge_template(tpl: &str) -> Result<(), PromptError> {
    let present = template::placeholders(tpl);
    match JUDGE_PLACEHOLDERS
        .iter()
        .find(|p| !present.iter().any(|q| q == *p))
    {
        Some(missing) => Err(PromptError::TemplatePlaceholder(missing.to_string())),
        None => Ok(()),
    }
}

/// Scores an open-ended answer with one judge call.
pub fn judge_open_ended(
    trace: &RunTrace,
    record: &QARecord,
    gateway: &Gateway,
    model_id: &str,
    judge_template: &str,
) -> Result<JudgeRecord, EvalError> {
    if record.is_mcq() {
        return Err(EvalError::NotOpenEnded(record.question_id.clone()));
    }
    validate_judge_template(judge_template)?;
    let prompt = template::fill(
        judge_template,
        &[
            ("question", &record.question),
            ("answer", record.answer_text.as_deref().unwrap_or_default()),
            ("prediction", trace.answer.raw_text.trim()),
        ],
    );
    let req = ChatRequest::new(model_id, CallRole::Judge, vec![Part::text(prompt)])
        .for_question(&record.video_id, &record.question_id);
    let done = gateway.complete(&req)?;
    let score = parse_judge_score(&done.response.text)?;
    Ok(JudgeRecord {
        score,
        call: CallRecord::completed(&req, &done.response, done.cache_hit, 0, Vec::new(), None),
    })
}
