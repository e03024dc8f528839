use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::analysis::{final_selected_fraction, selected_fraction, selection_precision_recall};
use super::{EvalError, QARecord};
use crate::strategies::RunTrace;

/// Accuracy within one question type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Summary of a set of fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl FractionStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Per-question scoring detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
    /// `None` for open-ended questions.
    pub correct: Option<bool>,
    pub choice_index: Option<usize>,
    pub selected_fraction: Option<f64>,
    pub context_tokens: u64,
    pub total_tokens: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall_span: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_questions: usize,
    /// Multiple-choice questions scored for accuracy.
    pub n_scored: usize,
    pub n_correct: usize,
    /// Unparsed answers, all counted as incorrect.
    pub n_unparsed: usize,
    pub accuracy: f64,
    pub per_type_accuracy: BTreeMap<String, TypeAccuracy>,
    /// Over the frames initially selected; absent for strategies that do
    /// not select.
    pub mean_selected_fraction: Option<f64>,
    pub selected_fraction_by_type: BTreeMap<String, FractionStats>,
    /// Same, over the selected frames that survived refinement.
    pub mean_final_selected_fraction: Option<f64>,
    pub mean_context_tokens: f64,
    pub mean_total_tokens: f64,
    pub mean_visual_tokens: f64,
    pub sum_total_tokens: u64,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_recall_span: Option<f64>,
    pub n_judged: usize,
    pub mean_judge_score: Option<f64>,
    pub failed_calls: usize,
    pub questions: Vec<QuestionScore>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Scores traces against their records. Unparsed answers count as
/// incorrect; open-ended questions are left out of accuracy and scored by
/// the judge when a judge record is present. The result does not depend on
/// trace order.
pub fn score_run(traces: &[RunTrace], records: &[QARecord]) -> Result<MetricsReport, EvalError> {
    let by_id: HashMap<&str, &QARecord> = records
        .iter()
        .map(|r| (r.question_id.as_str(), r))
        .collect();
    let mut sorted: Vec<&RunTrace> = traces.iter().collect();
    sorted.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let mut seen = HashSet::new();

    let mut questions = Vec::with_capacity(sorted.len());
    let mut fractions = Vec::new();
    let mut fractions_by_type: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut final_fractions = Vec::new();
    let (mut precisions, mut recalls, mut span_recalls, mut judged) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut per_type: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut n_scored, mut n_correct, mut n_unparsed, mut failed_calls) = (0, 0, 0, 0);
    let (mut context_sum, mut total_sum, mut visual_sum) = (0u64, 0u64, 0u64);

    for trace in sorted {
        let record = *by_id
            .get(trace.question_id.as_str())
            .ok_or_else(|| EvalError::MissingRecord(trace.question_id.clone()))?;
        if !seen.insert(trace.question_id.as_str()) {
            return Err(EvalError::DuplicateTrace(trace.question_id.clone()));
        }
        failed_calls += trace.failed_calls();
        context_sum += trace.totals.context_tokens_max;
        total_sum += trace.totals.total_tokens;
        visual_sum += trace.totals.visual_tokens;

        let correct = record
            .answer_index
            .filter(|_| record.is_mcq())
            .map(|truth| {
                n_scored += 1;
                if trace.answer.choice_index.is_none() {
                    n_unparsed += 1;
                }
                let hit = trace.answer.choice_index == Some(truth);
                n_correct += usize::from(hit);
                if let Some(t) = &record.question_type {
                    let entry = per_type.entry(t.clone()).or_default();
                    entry.0 += 1;
                    entry.1 += usize::from(hit);
                }
                hit
            });

        let fraction = trace
            .selection_pool_size
            .and_then(|pool| selected_fraction(trace, pool));
        if let Some(f) = fraction {
            fractions.push(f);
            if let Some(t) = &record.question_type {
                fractions_by_type.entry(t.clone()).or_default().push(f);
            }
        }
        if let Some(f) = final_selected_fraction(trace) {
            final_fractions.push(f);
        }

        let pr = (record.reference_spans.is_some() && trace.selected_ids_initial.is_some())
            .then(|| selection_precision_recall(trace, record).ok())
            .flatten();
        if let Some(pr) = &pr {
            precisions.push(pr.precision);
            recalls.push(pr.recall);
            span_recalls.push(pr.recall_span);
        }
        let judge_score = trace.judge.as_ref().map(|j| j.score.normalized);
        if let Some(s) = judge_score {
            judged.push(s);
        }

        questions.push(QuestionScore {
            question_id: trace.question_id.clone(),
            question_type: record.question_type.clone(),
            correct,
            choice_index: trace.answer.choice_index,
            selected_fraction: fraction,
            context_tokens: trace.totals.context_tokens_max,
            total_tokens: trace.totals.total_tokens,
            precision: pr.as_ref().map(|p| p.precision),
            recall: pr.as_ref().map(|p| p.recall),
            recall_span: pr.as_ref().map(|p| p.recall_span),
            judge_score,
        });
    }

    let n = questions.len();
    let per_n = |sum: u64| if n == 0 { 0.0 } else { sum as f64 / n as f64 };
    Ok(MetricsReport {
        n_questions: n,
        n_scored,
        n_correct,
        n_unparsed,
        accuracy: if n_scored == 0 {
            0.0
        } else {
            n_correct as f64 / n_scored as f64
        },
        per_type_accuracy: per_type
            .into_iter()
            .map(|(t, (n, correct))| {
                (
                    t,
                    TypeAccuracy {
                        n,
                        correct,
                        accuracy: correct as f64 / n as f64,
                    },
                )
            })
            .collect(),
        mean_selected_fraction: mean(&fractions),
        selected_fraction_by_type: fractions_by_type
            .into_iter()
            .filter_map(|(t, v)| FractionStats::of(&v).map(|s| (t, s)))
            .collect(),
        mean_final_selected_fraction: mean(&final_fractions),
        mean_context_tokens: per_n(context_sum),
        mean_total_tokens: per_n(total_sum),
        mean_visual_tokens: per_n(visual_sum),
        sum_total_tokens: total_sum,
        mean_precision: mean(&precisions),
        mean_recall: mean(&recalls),
        mean_recall_span: mean(&span_recalls),
        n_judged: judged.len(),
        mean_judge_score: mean(&judged),
        failed_calls,
        questions,
    })
}
