use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::score_run;
use super::{EvalError, QARecord};
use crate::strategies::RunTrace;

/// Traces produced by one strategy under one configuration.
#[derive(Debug, Clone, Copy)]
pub struct CostGroup<'a> {
    pub strategy: &'a str,
    pub config_hash: &'a str,
    pub traces: &'a [RunTrace],
    pub records: &'a [QARecord],
}

/// One row of the cost/accuracy table. Column order is the CSV order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub strategy: String,
    pub config_hash: String,
    pub n_questions: usize,
    pub accuracy: f64,
    /// Largest single-call token count in the group.
    pub context_tokens_max: u64,
    pub context_tokens_mean: f64,
    pub total_tokens_mean: f64,
    pub total_tokens_sum: u64,
    pub visual_tokens_mean: f64,
    pub mean_selected_fraction: Option<f64>,
    pub mean_judge_score: Option<f64>,
    pub failed_calls: usize,
}

/// Builds one row per group, sorted by mean total tokens (ties by strategy
/// then config hash).
pub fn cost_report(groups: &[CostGroup<'_>]) -> Result<Vec<CostRow>, EvalError> {
    let mut rows = groups
        .iter()
        .map(|g| {
            let metrics = score_run(g.traces, g.records)?;
            Ok(CostRow {
                strategy: g.strategy.to_string(),
                config_hash: g.config_hash.to_string(),
                n_questions: metrics.n_questions,
                accuracy: metrics.accuracy,
                context_tokens_max: g
                    .traces
                    .iter()
                    .map(|t| t.totals.context_tokens_max)
                    .max()
                    .unwrap_or(0),
                context_tokens_mean: metrics.mean_context_tokens,
                total_tokens_mean: metrics.mean_total_tokens,
                total_tokens_sum: metrics.sum_total_tokens,
                visual_tokens_mean: metrics.mean_visual_tokens,
                mean_selected_fraction: metrics.mean_selected_fraction,
                mean_judge_score: metrics.mean_judge_score,
                failed_calls: metrics.failed_calls,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    rows.sort_by(|a, b| {
        a.total_tokens_mean
            .total_cmp(&b.total_tokens_mean)
            .then_with(|| a.strategy.cmp(&b.strategy))
            .then_with(|| a.config_hash.cmp(&b.config_hash))
    });
    Ok(rows)
}

pub fn write_cost_csv<W: Write>(rows: &[CostRow], out: W) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| EvalError::Csv(e.to_string()))?;
    Ok(())
}

pub fn cost_csv_string(rows: &[CostRow]) -> Result<String, EvalError> {
    let mut buf = Vec::new();
    write_cost_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| EvalError::Csv(e.to_string()))
}
