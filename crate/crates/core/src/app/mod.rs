//! Operator surface: experiment configs, synthetic benchmarks, runs and
//! reports. The `tcot` binary is a thin wrapper over this module.

mod config;
mod report;
mod run;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{BackendSpec, EmbeddingSpec, ExperimentConfig, JudgeSpec};
pub use report::{report_command, ReportOptions, ReportTable};
pub use run::{
    read_traces, run_command, FailureRecord, RunOptions, RunReport, RunSummary, FAILURES_FILE,
    META_FILE, REPORT_CSV_FILE, REPORT_JSON_FILE, RESOLVED_CONFIG_FILE, TRACES_FILE,
};
pub use synth::{
    generate, synth_benchmark, Needle, SynthBenchmark, SynthOutput, SynthSpec, DATASET_FILE,
    EXAMPLE_CONFIG_FILE, FRAMES_DIR, MOCK_SCRIPT_FILE,
};

use crate::eval::EvalError;
use crate::frames::FrameError;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Frames(#[from] FrameError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} holds a run with a different config; pass --force or choose another output dir")]
    RunDirConflict(PathBuf),
    #[error("{0} has no traces.jsonl and config.resolved.json")]
    MissingTraces(PathBuf),
    #[error(
        "{first} and {other} were run on different datasets; pass --allow-mixed to merge them"
    )]
    DatasetMismatch { first: PathBuf, other: PathBuf },
    #[error("synth spec: {0}")]
    InvalidSynthSpec(String),
}

impl AppError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for backend failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Backend(_) => 2,
            _ => 1,
        }
    }
}
