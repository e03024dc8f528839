use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EvalError, QARecord};
use crate::frames::{FrameId, Provenance};
use crate::strategies::RunTrace;

/// Selection quality against annotated evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    /// Fraction of reference frames selected.
    pub recall: f64,
    /// Fraction of reference spans with at least one selected frame.
    pub recall_span: f64,
    pub selected: usize,
    pub reference: usize,
    pub hits: usize,
}

/// Frame ids covered by a `[start, end]` span in seconds at one frame per
/// second: `floor(start) + 1 ..= ceil(end)`, never empty before clamping to
/// the video length.
pub fn span_frames(start: f64, end: f64, frame_count: u32) -> impl Iterator<Item = FrameId> {
    let first = start.floor() as u64 + 1;
    let last = (end.ceil() as u64).max(first).min(u64::from(frame_count));
    (first..=last).map(|id| id as FrameId)
}

pub fn reference_frames(spans: &[[f64; 2]], frame_count: u32) -> BTreeSet<FrameId> {
    spans
        .iter()
        .flat_map(|[s, e]| span_frames(*s, *e, frame_count))
        .collect()
}

/// Precision and recall of the initially selected frames against the
/// record's reference spans. An empty selection has precision 1.
pub fn selection_precision_recall(
    trace: &RunTrace,
    record: &QARecord,
) -> Result<PrecisionRecall, EvalError> {
    let spans = record
        .reference_spans
        .as_deref()
        .ok_or_else(|| EvalError::NoReferenceSpans(record.question_id.clone()))?;
    let selected: BTreeSet<FrameId> = trace
        .selected_ids_initial
        .as_ref()
        .ok_or_else(|| EvalError::NoSelection(trace.question_id.clone()))?
        .iter()
        .copied()
        .collect();
    let reference = reference_frames(spans, trace.frame_count);
    if reference.is_empty() {
        return Err(EvalError::NoReferenceSpans(record.question_id.clone()));
    }
    let hits = selected.intersection(&reference).count();
    let precision = if selected.is_empty() {
        tracing::debug!(question_id = %trace.question_id, "empty selection; precision taken as 1");
        1.0
    } else {
        hits as f64 / selected.len() as f64
    };
    let nonempty_spans: Vec<_> = spans
        .iter()
        .map(|[s, e]| span_frames(*s, *e, trace.frame_count).collect::<Vec<_>>())
        .filter(|ids| !ids.is_empty())
        .collect();
    let spans_hit = nonempty_spans
        .iter()
        .filter(|ids| ids.iter().any(|id| selected.contains(id)))
        .count();
    Ok(PrecisionRecall {
        precision,
        recall: hits as f64 / reference.len() as f64,
        recall_span: spans_hit as f64 / nonempty_spans.len() as f64,
        selected: selected.len(),
        reference: reference.len(),
        hits,
    })
}

/// Share of the selection pool that was initially selected. `None` for
/// strategies that make no selection and for an empty pool.
pub fn selected_fraction(trace: &RunTrace, pool_size: u32) -> Option<f64> {
    let selected = trace.selected_ids_initial.as_ref()?;
    (pool_size > 0).then(|| selected.len() as f64 / f64::from(pool_size))
}

/// Share of the selection pool that survived into the final context.
pub fn final_selected_fraction(trace: &RunTrace) -> Option<f64> {
    trace.selected_ids_initial.as_ref()?;
    let pool = trace.selection_pool_size.filter(|&p| p > 0)?;
    Some(trace.final_context.ids_with(Provenance::Selected).len() as f64 / f64::from(pool))
}
