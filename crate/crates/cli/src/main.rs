use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tcot_core::app::{
    report_command, run_command, synth_benchmark, AppError, ExperimentConfig, ReportOptions,
    RunOptions, SynthSpec,
};
use tcot_core::eval::cost_csv_string;
use tracing_subscriber::EnvFilter;

/// Long-video question answering with temporal chain-of-thought frame
/// selection.
#[derive(Debug, Parser)]
#[command(name = "tcot", version)]
struct Cli {
    /// Log progress (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment config over its dataset.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Discard existing traces instead of resuming.
        #[arg(long)]
        force: bool,
        /// Write to this directory instead of the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic needle-in-a-haystack benchmark.
    Synth {
        /// JSON synth spec; built-in defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge finished runs into one cost/accuracy table.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Merge runs over different datasets.
        #[arg(long)]
        allow_mixed: bool,
        /// CSV output; a JSON copy is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_PARTIAL: u8 = 3;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn run(config: PathBuf, force: bool, out: Option<PathBuf>) -> Result<ExitCode, AppError> {
    let cfg = ExperimentConfig::load(&config)?;
    let threshold = cfg.max_failure_fraction;
    let summary = run_command(
        cfg,
        &RunOptions {
            force,
            output_dir: out,
        },
    )?;
    println!(
        "{}: {} completed, {} failed, {} already done (config {})",
        summary.output_dir.display(),
        summary.completed,
        summary.failed,
        summary.skipped,
        summary.config_hash
    );
    if summary.failure_fraction() > threshold {
        eprintln!(
            "{:.1}% of questions failed, above the {:.1}% threshold",
            summary.failure_fraction() * 100.0,
            threshold * 100.0
        );
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(spec: Option<PathBuf>, out: PathBuf) -> Result<ExitCode, AppError> {
    let spec = match spec {
        Some(p) => SynthSpec::load(&p)?,
        None => SynthSpec::default(),
    };
    let written = synth_benchmark(&spec, &out)?;
    println!("dataset: {}", written.dataset.display());
    println!("frames: {}", written.frames_root.display());
    println!("mock script: {}", written.mock_script.display());
    println!("example config: {}", written.example_config.display());
    Ok(ExitCode::SUCCESS)
}

fn report(dirs: Vec<PathBuf>, allow_mixed: bool, out: PathBuf) -> Result<ExitCode, AppError> {
    let table = report_command(&dirs, ReportOptions { allow_mixed })?;
    let csv = cost_csv_string(&table.rows)?;
    std::fs::write(&out, &csv).map_err(|e| AppError::Io {
        path: out.clone(),
        source: e,
    })?;
    let json_path = out.with_extension("json");
    let json = serde_json::to_string_pretty(&table).expect("table serializes") + "\n";
    std::fs::write(&json_path, json).map_err(|e| AppError::Io {
        path: json_path.clone(),
        source: e,
    })?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Run { config, force, out } => run(config, force, out),
        Command::Synth { spec, out } => synth(spec, out),
        Command::Report {
            dirs,
            allow_mixed,
            out,
        } => report(dirs, allow_mixed, out),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
