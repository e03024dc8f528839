//! Datasets, scoring and the analyses run over finished traces.

mod analysis;
mod cost;
mod dataset;
mod judge;
mod metrics;

use std::path::PathBuf;

use thiserror::Error;

pub use analysis::{
    final_selected_fraction, reference_frames, selected_fraction, selection_precision_recall,
    span_frames, PrecisionRecall,
};
pub use cost::{cost_csv_string, cost_report, write_cost_csv, CostGroup, CostRow};
pub use dataset::{load_dataset, parse_dataset, LineError, QARecord};
pub use judge::{judge_open_ended, validate_judge_template};
pub use metrics::{score_run, FractionStats, MetricsReport, QuestionScore, TypeAccuracy};

use crate::gateway::GatewayError;
use crate::prompting::PromptError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid dataset:\n{}", .errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Schema {
        path: PathBuf,
        errors: Vec<LineError>,
    },
    #[error("no dataset record for question '{0}'")]
    MissingRecord(String),
    #[error("more than one trace for question '{0}'")]
    DuplicateTrace(String),
    #[error("question '{0}' has no reference spans inside the video")]
    NoReferenceSpans(String),
    #[error("trace for '{0}' records no frame selection")]
    NoSelection(String),
    #[error("question '{0}' is multiple choice, not open-ended")]
    NotOpenEnded(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("csv output: {0}")]
    Csv(String),
}
