use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{read_traces, RESOLVED_CONFIG_FILE, TRACES_FILE};
use super::AppError;
use crate::eval::{
    cost_report, load_dataset, score_run, CostGroup, CostRow, QARecord, TypeAccuracy,
};
use crate::strategies::RunTrace;

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    /// Merge runs over different datasets.
    pub allow_mixed: bool,
}

/// Combined cost/accuracy table over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<CostRow>,
    /// Accuracy per question type, keyed by `strategy [config_hash]`.
    pub per_type: BTreeMap<String, BTreeMap<String, TypeAccuracy>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

struct LoadedRun {
    dir: PathBuf,
    strategy: String,
    config_hash: String,
    dataset_sha256: Option<String>,
    traces: Vec<RunTrace>,
    records: Vec<QARecord>,
}

fn load_run(dir: &Path) -> Result<LoadedRun, AppError> {
    let cfg_path = dir.join(RESOLVED_CONFIG_FILE);
    let traces_path = dir.join(TRACES_FILE);
    if !cfg_path.exists() || !traces_path.exists() {
        return Err(AppError::MissingTraces(dir.to_path_buf()));
    }
    let cfg = ExperimentConfig::load(&cfg_path)?;
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        strategy: cfg.strategy.clone(),
        config_hash: cfg.config_hash(),
        dataset_sha256: cfg.dataset_sha256.clone(),
        traces: read_traces(&traces_path)?,
        records: load_dataset(&cfg.dataset)?,
    })
}

/// Merges finished runs into one table keyed by strategy and config hash.
/// The same configuration passed twice is counted once.
pub fn report_command(dirs: &[PathBuf], opts: ReportOptions) -> Result<ReportTable, AppError> {
    let mut runs: Vec<LoadedRun> = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for dir in dirs {
        let run = load_run(dir)?;
        if !seen.insert(run.config_hash.clone()) {
            let msg = format!(
                "{} repeats config {} and was skipped",
                run.dir.display(),
                run.config_hash
            );
            warnings.push(msg);
            continue;
        }
        if let Some(first) = runs.first() {
            if first.dataset_sha256 != run.dataset_sha256 && !opts.allow_mixed {
                return Err(AppError::DatasetMismatch {
                    first: first.dir.clone(),
                    other: run.dir.clone(),
                });
            }
        }
        runs.push(run);
    }
    let groups: Vec<CostGroup<'_>> = runs
        .iter()
        .map(|r| CostGroup {
            strategy: &r.strategy,
            config_hash: &r.config_hash,
            traces: &r.traces,
            records: &r.records,
        })
        .collect();
    let rows = cost_report(&groups)?;
    let per_type = runs
        .iter()
        .map(|r| {
            let metrics = score_run(&r.traces, &r.records)?;
            Ok((
                format!("{} [{}]", r.strategy, r.config_hash),
                metrics.per_type_accuracy,
            ))
        })
        .collect::<Result<_, AppError>>()?;
    Ok(ReportTable {
        rows,
        per_type,
        warnings,
    })
}
