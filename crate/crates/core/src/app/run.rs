use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::AppError;
use crate::eval::{
    cost_csv_string, cost_report, judge_open_ended, load_dataset, score_run, CostGroup,
    MetricsReport, QARecord,
};
use crate::frames::FrameStore;
use crate::gateway::{sha256_hex, GatewayError, GatewayStats};
use crate::strategies::{Pipeline, RunTrace, StrategyError};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_CSV_FILE: &str = "report.csv";
/// Timestamps and counters; the only run output that varies between
/// identical runs.
pub const META_FILE: &str = "run_meta.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Discard existing traces instead of resuming.
    pub force: bool,
    /// Overrides the config's `output_dir`.
    pub output_dir: Option<PathBuf>,
}

/// A question that could not be answered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub question_id: String,
    pub video_id: String,
    pub error: String,
}

/// Header and metrics written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub config_hash: String,
    pub dataset_sha256: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub config_hash: String,
    pub total: usize,
    /// Questions already traced by an earlier invocation.
    pub skipped: usize,
    pub completed: usize,
    pub failed: usize,
}

impl RunSummary {
    /// Failed share of the questions attempted in this invocation.
    pub fn failure_fraction(&self) -> f64 {
        let attempted = self.completed + self.failed;
        if attempted == 0 {
            0.0
        } else {
            self.failed as f64 / attempted as f64
        }
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    started_unix_ms: u128,
    finished_unix_ms: u128,
    summary: &'a RunSummary,
    backend_calls: usize,
    cache_hits: usize,
    retries: usize,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Reads a traces file. A torn final line left by a crash is cut off so
/// appends start on a clean line; corruption elsewhere is an error.
pub fn read_traces(path: &Path) -> Result<Vec<RunTrace>, AppError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(AppError::io(path, e)),
    };
    let mut traces = Vec::new();
    let mut valid_len = 0u64;
    let mut lines = BufReader::new(file).split(b'\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        let is_last = lines.peek().is_none();
        if line.iter().all(u8::is_ascii_whitespace) {
            valid_len += line.len() as u64 + 1;
            continue;
        }
        match serde_json::from_slice::<RunTrace>(&line) {
            Ok(t) => {
                traces.push(t);
                valid_len += line.len() as u64 + 1;
            }
            Err(_) if is_last => {
                tracing::warn!(path = %path.display(), "dropping torn final trace line");
                let f = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(|e| AppError::io(path, e))?;
                f.set_len(valid_len).map_err(|e| AppError::io(path, e))?;
            }
            Err(e) => {
                return Err(AppError::Config(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )));
            }
        }
    }
    Ok(traces)
}

enum Outcome {
    Trace(Box<RunTrace>),
    Failed(FailureRecord),
}

fn is_fatal(e: &StrategyError) -> bool {
    matches!(e, StrategyError::Gateway(GatewayError::Auth(_)))
}

/// Runs one experiment into its output directory, resuming from any traces
/// already there.
pub fn run_command(
    mut config: ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunSummary, AppError> {
    let started = unix_ms();
    if let Some(dir) = &opts.output_dir {
        config.output_dir = std::path::absolute(dir).unwrap_or_else(|_| dir.clone());
    }
    let strategy = config.validate()?;
    let records = load_dataset(&config.dataset)?;
    let dataset_bytes =
        std::fs::read(&config.dataset).map_err(|e| AppError::io(&config.dataset, e))?;
    let dataset_sha = sha256_hex(&dataset_bytes);
    match &config.dataset_sha256 {
        Some(expected) if *expected != dataset_sha => {
            return Err(AppError::Config(format!(
                "dataset {} has sha256 {dataset_sha}, config expects {expected}",
                config.dataset.display()
            )))
        }
        _ => config.dataset_sha256 = Some(dataset_sha.clone()),
    }
    let config_hash = config.config_hash();

    let out = config.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;
    let resolved_path = out.join(RESOLVED_CONFIG_FILE);
    let traces_path = out.join(TRACES_FILE);
    let failures_path = out.join(FAILURES_FILE);
    if opts.force {
        for p in [&traces_path, &failures_path] {
            if p.exists() {
                std::fs::remove_file(p).map_err(|e| AppError::io(p, e))?;
            }
        }
    } else if resolved_path.exists() && traces_path.exists() {
        let previous = ExperimentConfig::load(&resolved_path)?;
        if previous.config_hash() != config_hash {
            return Err(AppError::RunDirConflict(out));
        }
    }
    write_pretty(&resolved_path, &config)?;

    let existing = read_traces(&traces_path)?;
    let done: HashSet<&str> = existing.iter().map(|t| t.question_id.as_str()).collect();
    let pending: Vec<&QARecord> = records
        .iter()
        .filter(|r| !done.contains(r.question_id.as_str()))
        .collect();
    let skipped = records.len() - pending.len();
    tracing::info!(strategy = %strategy, total = records.len(), skipped, "starting run");

    let gateway = config.build_gateway()?;
    let embedder = config.build_embedder()?;
    let judge = config.judge_template()?;
    let mut pipeline = Pipeline::new(
        &gateway,
        config.backend.model_id(),
        config.effective_strategy_config(),
    )
    .map_err(|e| AppError::Config(e.to_string()))?;
    if let Some(e) = embedder.as_deref() {
        pipeline = pipeline.with_embedder(e);
    }

    let mut stores: HashMap<&str, Result<Arc<FrameStore>, String>> = HashMap::new();
    for r in &pending {
        stores.entry(r.video_id.as_str()).or_insert_with(|| {
            FrameStore::open(&config.frames_root, &r.video_id)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        });
    }

    let mut traces_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&traces_path)
        .map_err(|e| AppError::io(&traces_path, e))?;
    let mut failures_file =
        File::create(&failures_path).map_err(|e| AppError::io(&failures_path, e))?;

    let next = AtomicUsize::new(0);
    let fatal = AtomicBool::new(false);
    let fatal_error: std::sync::Mutex<Option<String>> = std::sync::Mutex::default();
    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
    let (mut completed, mut failed) = (0usize, 0usize);

    let process = |qa: &QARecord| -> Outcome {
        let fail = |error: String| {
            Outcome::Failed(FailureRecord {
                question_id: qa.question_id.clone(),
                video_id: qa.video_id.clone(),
                error,
            })
        };
        let store = match &stores[qa.video_id.as_str()] {
            Ok(s) => s,
            Err(e) => return fail(e.clone()),
        };
        match pipeline.run(strategy, store, qa) {
            Ok(mut trace) => {
                if let (Some((model, template)), false) = (&judge, qa.is_mcq()) {
                    match judge_open_ended(&trace, qa, &gateway, model, template) {
                        Ok(j) => trace.judge = Some(j),
                        Err(e) => {
                            tracing::warn!(question_id = %qa.question_id, error = %e, "judging failed")
                        }
                    }
                }
                Outcome::Trace(Box::new(trace))
            }
            Err(e) => {
                if is_fatal(&e) {
                    fatal.store(true, Ordering::SeqCst);
                    *fatal_error.lock().unwrap() = Some(e.to_string());
                }
                tracing::warn!(question_id = %qa.question_id, error = %e, "question failed");
                fail(e.to_string())
            }
        }
    };

    let write_result: Result<(), AppError> = std::thread::scope(|s| {
        for _ in 0..config.parallelism.min(pending.len()) {
            let tx = tx.clone();
            let (next, fatal, pending, process) = (&next, &fatal, &pending, &process);
            s.spawn(move || loop {
                if fatal.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(qa) = pending.get(i) else { break };
                if tx.send((i, process(qa))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Single writer; results are appended in dataset order so that
        // identical runs produce identical files.
        let mut buffer: BTreeMap<usize, Outcome> = BTreeMap::new();
        let mut next_to_write = 0usize;
        for (i, outcome) in rx {
            buffer.insert(i, outcome);
            while let Some(outcome) = buffer.remove(&next_to_write) {
                match outcome {
                    Outcome::Trace(t) => {
                        let line = serde_json::to_string(&t).expect("trace serializes");
                        writeln!(traces_file, "{line}")
                            .map_err(|e| AppError::io(&traces_path, e))?;
                        traces_file
                            .flush()
                            .map_err(|e| AppError::io(&traces_path, e))?;
                        completed += 1;
                    }
                    Outcome::Failed(f) => {
                        let line = serde_json::to_string(&f).expect("failure serializes");
                        writeln!(failures_file, "{line}")
                            .map_err(|e| AppError::io(&failures_path, e))?;
                        failed += 1;
                    }
                }
                next_to_write += 1;
            }
        }
        Ok(())
    });
    write_result?;
    failures_file
        .flush()
        .map_err(|e| AppError::io(&failures_path, e))?;

    if let Some(e) = fatal_error.into_inner().unwrap() {
        return Err(AppError::Backend(e));
    }

    let all = read_traces(&traces_path)?;
    write_reports(
        &out,
        strategy.name(),
        &config_hash,
        &dataset_sha,
        &all,
        &records,
    )?;

    let summary = RunSummary {
        output_dir: out.clone(),
        config_hash,
        total: records.len(),
        skipped,
        completed,
        failed,
    };
    let stats: GatewayStats = gateway.stats();
    write_pretty(
        &out.join(META_FILE),
        &RunMeta {
            started_unix_ms: started,
            finished_unix_ms: unix_ms(),
            summary: &summary,
            backend_calls: stats.backend_calls,
            cache_hits: stats.cache_hits,
            retries: stats.retries,
        },
    )?;
    tracing::info!(completed, failed, skipped, "run finished");
    Ok(summary)
}

fn write_reports(
    out: &Path,
    strategy: &str,
    config_hash: &str,
    dataset_sha: &str,
    traces: &[RunTrace],
    records: &[QARecord],
) -> Result<(), AppError> {
    let report = RunReport {
        strategy: strategy.to_string(),
        config_hash: config_hash.to_string(),
        dataset_sha256: dataset_sha.to_string(),
        metrics: score_run(traces, records)?,
    };
    write_pretty(&out.join(REPORT_JSON_FILE), &report)?;
    let rows = cost_report(&[CostGroup {
        strategy,
        config_hash,
        traces,
        records,
    }])?;
    let csv_path = out.join(REPORT_CSV_FILE);
    std::fs::write(&csv_path, cost_csv_string(&rows)?).map_err(|e| AppError::io(&csv_path, e))
}
