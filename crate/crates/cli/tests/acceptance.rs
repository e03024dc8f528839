//! Acceptance suite. Each criterion prints one `[PASS]`/`[FAIL]`/`[SKIP]`
//! line with its measurement and wall time; the process exits non-zero when
//! a gating criterion fails.
//!
//! Runs with `cargo test -p tcot-cli --test acceptance`. Time limits assume
//! the workspace dev profile (dependencies built at opt-level 2).

#[path = "../../core/tests/common/fuzz.rs"]
mod fuzz;
#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcot_core::app::{
    generate, read_traces, run_command, ExperimentConfig, RunOptions, RunReport, SynthSpec,
    REPORT_JSON_FILE, TRACES_FILE,
};
use tcot_core::eval::{load_dataset, score_run, selection_precision_recall, QARecord};
use tcot_core::frames::{
    merge_context, partition_segments, subsample_to_limit, uniform_sample, FrameStore, Provenance,
    TokenBudget,
};
use tcot_core::gateway::{
    CallRole, EmbeddingBackend, Gateway, MockBackend, MockEmbedder, MockMode, MockRoutes,
    MockScript,
};
use tcot_core::prompting::{
    mean_normalized, parse_final_answer, parse_judge_score, parse_selection_response,
    AnswerDialect, LocalIdMap, ParsePath,
};
use tcot_core::strategies::{
    majority_vote, CallRecord, Pipeline, RunTrace, Strategy, StrategyConfig, StrategyError,
    TraceTotals, TRACE_SCHEMA,
};
use tcot_core::FrameId;

/// What a criterion measured when it passed; the failure message otherwise.
type Outcome = Result<String, String>;

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    gating: bool,
    run: fn() -> Outcome,
}

/// Returns early with a formatted failure.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SKIPPED: &str = "skipped:";

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "frame-math oracle equivalence",
            limit: secs(10),
            gating: true,
            run: frame_math,
        },
        Criterion {
            id: 2,
            name: "budget invariants across strategies",
            limit: secs(60),
            gating: true,
            run: budget_invariants,
        },
        Criterion {
            id: 3,
            name: "parser robustness",
            limit: secs(60),
            gating: true,
            run: parser_robustness,
        },
        Criterion {
            id: 4,
            name: "needle benchmark ordering",
            limit: secs(120),
            gating: true,
            run: needle_ordering,
        },
        Criterion {
            id: 5,
            name: "strategy equivalences",
            limit: secs(10),
            gating: true,
            run: equivalences,
        },
        Criterion {
            id: 6,
            name: "self-consistency vote math",
            limit: secs(1),
            gating: true,
            run: vote_math,
        },
        Criterion {
            id: 7,
            name: "metrics hand-check",
            limit: secs(1),
            gating: true,
            run: metrics_hand_check,
        },
        Criterion {
            id: 8,
            name: "cli run determinism",
            limit: secs(120),
            gating: true,
            run: cli_determinism,
        },
        Criterion {
            id: 9,
            name: "token accounting",
            limit: secs(10),
            gating: true,
            run: token_accounting,
        },
        Criterion {
            id: 10,
            name: "live smoke test",
            limit: secs(1800),
            gating: false,
            run: live_smoke,
        },
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();

    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| filter.is_empty() || filter.contains(&c.id))
    {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let took = start.elapsed();
        let (verdict, detail) = match outcome {
            Ok(d) if d.starts_with(SKIPPED) => (Verdict::Skip, d),
            Ok(d) if took > c.limit => (
                Verdict::Fail,
                format!("{d}; over the {}s limit", c.limit.as_secs()),
            ),
            Ok(d) => (Verdict::Pass, d),
            Err(e) => (Verdict::Fail, e),
        };
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Skip => "SKIP",
            Verdict::Fail if c.gating => {
                failed += 1;
                "FAIL"
            }
            Verdict::Fail => "FAIL (non-gating)",
        };
        println!(
            "[{tag}] {} {}: {detail} ({:.1}s)",
            c.id,
            c.name,
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} gating criteria failed");
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "non-string panic".into())
}

// ---- 1 ----

fn frame_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 10_000;
    for i in 0..instances {
        let n_frames: u32 = if i % 4 == 0 {
            rng.random_range(1..=40)
        } else {
            rng.random_range(1..=20_000)
        };
        let n = rng.random_range(0..=n_frames.min(1_000) + 5);
        let l = rng.random_range(1..=n_frames.min(300));
        let k = rng.random_range(1..=250);
        let u = rng.random_range(0..=k);

        ensure!(
            uniform_sample(n_frames, n) == oracle::uniform_sample(n_frames, n),
            "uniform_sample({n_frames}, {n}) differs from the oracle"
        );
        let segs = partition_segments(n_frames, l).map_err(|e| e.to_string())?;
        let pairs: Vec<_> = segs.iter().map(|s| (s.first, s.last)).collect();
        ensure!(
            Some(pairs) == oracle::partition_segments(n_frames, l),
            "partition_segments({n_frames}, {l}) differs from the oracle"
        );

        let count = rng.random_range(0..=n_frames.min(600));
        let mut ids: Vec<FrameId> = (0..count).map(|_| rng.random_range(1..=n_frames)).collect();
        ids.sort_unstable();
        ids.dedup();
        let m = rng.random_range(0..=k);
        ensure!(
            subsample_to_limit(&ids, m) == oracle::subsample_to_limit(&ids, m),
            "subsample_to_limit(<{} ids>, {m}) differs from the oracle",
            ids.len()
        );
        // The merge also sees unsorted, duplicated input.
        let mut raw = ids.clone();
        raw.extend(ids.iter().step_by(3));
        raw.reverse();
        ensure!(
            merge_context(&raw, n_frames, k, u) == oracle::merge_context(&raw, n_frames, k, u),
            "merge_context(N={n_frames}, k={k}, u={u}) differs from the oracle"
        );
    }
    Ok(format!(
        "{instances} instances x 4 operations, 0 mismatches"
    ))
}

// ---- 2 ----

struct Stores(HashMap<u32, FrameStore>);

impl Stores {
    fn get(&mut self, n: u32) -> &FrameStore {
        self.0
            .entry(n)
            .or_insert_with(|| FrameStore::generated("vid", n).expect("non-empty"))
    }
}

fn random_routes(rng: &mut ChaCha8Rng, n_frames: u32) -> MockRoutes {
    let relevant: Vec<FrameId> = match rng.random_range(0..3) {
        0 => Vec::new(),
        1 => {
            let start = rng.random_range(1..=n_frames);
            (start..=(start + rng.random_range(0..20)).min(n_frames)).collect()
        }
        _ => (0..rng.random_range(1..400))
            .map(|_| rng.random_range(1..=n_frames))
            .collect(),
    };
    let select = match rng.random_range(0..3) {
        0 => MockMode::OracleSelect {
            relevant_ids: relevant.clone(),
            caption_keyword: None,
        },
        1 => MockMode::NoisySelect {
            relevant_ids: relevant.clone(),
            fp_rate: rng.random_range(0.0..0.5),
            fn_rate: rng.random_range(0.0..0.5),
            rng_seed: rng.random(),
        },
        _ => MockMode::MalformedJson {
            probability: rng.random_range(0.0..=1.0),
            rng_seed: rng.random(),
            relevant_ids: relevant.clone(),
        },
    };
    let answer = |abstain| MockMode::NeedleAnswer {
        relevant_ids: relevant.clone(),
        required_fraction: 0.2,
        correct_idx: 1,
        distractor_idx: 2,
        abstain_when_absent: abstain,
    };
    MockRoutes {
        select: Some(select),
        answer: Some(answer(false)),
        segment_answer: Some(answer(rng.random_bool(0.5))),
        caption: Some(MockMode::FixedText {
            text: "Frame {frame_id}.".into(),
        }),
        aggregate: Some(MockMode::EchoAnswer { fallback: None }),
        ..MockRoutes::default()
    }
}

fn random_config(rng: &mut ChaCha8Rng, n_frames: u32) -> StrategyConfig {
    let tokens_per_frame = rng.random_range(1..=300);
    let k = rng.random_range(1..=130);
    let reserve = rng.random_range(0..=2_000);
    let budget = TokenBudget::new(
        k * tokens_per_frame + reserve + rng.random_range(0..tokens_per_frame),
        tokens_per_frame,
        reserve,
    );
    StrategyConfig {
        budget,
        uniform_frames: rng.random_range(0..=k),
        segments: rng.random_range(1..=n_frames.min(16)),
        frames_per_segment: rng.random_range(1..=k + 20),
        neighborhood_radius: rng.random_range(0..=12),
        max_iterations: rng.random_range(1..=4),
        n_votes: [1, 3, 5][rng.random_range(0..3)],
        similarity_pool: rng.random_bool(0.3).then(|| rng.random_range(1..=300)),
        rng_seed: rng.random(),
        parallelism: rng.random_range(1..=4),
        ..StrategyConfig::default()
    }
}

fn budget_invariants() -> Outcome {
    let runs_per_strategy = 1_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut stores = Stores(HashMap::new());
    let embedder = MockEmbedder::new(16, 2);
    let qa = QARecord {
        question_id: "q".into(),
        video_id: "vid".into(),
        question: "Which object appears?".into(),
        options: ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
        answer_index: Some(1),
        answer_text: None,
        question_type: None,
        reference_spans: None,
    };
    // Frame stores are costly to build, so lengths come from a fixed random
    // pool (with the short edge cases) and each store is reused.
    let mut lengths: Vec<u32> = (0..256).map(|_| rng.random_range(1..=3_000)).collect();
    lengths.extend([1, 2, 3, 119, 120, 121]);
    let mut runs = 0;
    let mut rejected = 0;
    for strategy in Strategy::ALL {
        for _ in 0..runs_per_strategy {
            let n_frames = lengths[rng.random_range(0..lengths.len())];
            let cfg = random_config(&mut rng, n_frames);
            let k = cfg.frame_budget().map_err(|e| e.to_string())?;
            let too_wide = cfg.frames_per_segment > k;
            let gw = Gateway::new(Arc::new(MockBackend::new(MockScript {
                default: random_routes(&mut rng, n_frames),
                ..MockScript::default()
            })));
            let pipeline = Pipeline::new(&gw, "mock", cfg.clone())
                .map_err(|e| e.to_string())?
                .with_embedder(&embedder as &dyn EmbeddingBackend);
            let independent = matches!(
                strategy,
                Strategy::IndependentSegments | Strategy::IndependentSegmentsHc
            );
            match pipeline.run(strategy, stores.get(n_frames), &qa) {
                Ok(trace) => {
                    ensure!(
                        !(independent && too_wide),
                        "{strategy}: s={} > k={k} was accepted",
                        cfg.frames_per_segment
                    );
                    trace
                        .check_invariants(k)
                        .map_err(|e| format!("{strategy} N={n_frames} {cfg:?}: {e}"))?;
                    ensure!(
                        trace.final_context.len() <= k as usize,
                        "{strategy}: context over k"
                    );
                    runs += 1;
                }
                Err(StrategyError::InvalidConfig(_)) if independent && too_wide => rejected += 1,
                Err(e) => return Err(format!("{strategy} N={n_frames} {cfg:?}: {e}")),
            }
        }
    }
    Ok(format!(
        "{runs} runs over {} strategies within budget; {rejected} over-wide windows rejected",
        Strategy::ALL.len()
    ))
}

// ---- 3 ----

fn parser_robustness() -> Outcome {
    let inputs = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut fallbacks = 0;
    for i in 0..inputs {
        let text = fuzz::input(&mut rng);
        let first = rng.random_range(1..5_000);
        let presented: Vec<FrameId> = (0..rng.random_range(1..80u32))
            .map(|j| first + 3 * j)
            .collect();
        let map = LocalIdMap::new(presented.clone());
        let out = catch_unwind(|| parse_selection_response(&text, &map)).map_err(|p| {
            format!(
                "selection parser panicked on input {i} {text:?}: {}",
                panic_text(&p)
            )
        })?;
        let allowed: BTreeSet<_> = presented.iter().collect();
        ensure!(
            out.frame_ids.iter().all(|id| allowed.contains(id)),
            "input {i} {text:?}: id outside the presented set"
        );
        ensure!(
            out.frame_ids.windows(2).all(|w| w[0] < w[1]),
            "input {i} {text:?}: ids not ascending"
        );
        if out.repaired.fallback_all {
            ensure!(
                out.frame_ids == presented,
                "input {i} {text:?}: fallback is not every presented frame"
            );
            fallbacks += 1;
        }
        ensure!(
            !fuzz::clearly_not_json(&text) || out.repaired.fallback_all,
            "non-JSON input {i} {text:?} did not fall back to every presented frame"
        );

        let options = rng.random_range(2..=5);
        for dialect in [
            AnswerDialect::DigitParen,
            AnswerDialect::BareLetter,
            AnswerDialect::OpenEnded,
        ] {
            let n = if dialect == AnswerDialect::OpenEnded {
                0
            } else {
                options
            };
            let a = catch_unwind(|| parse_final_answer(&text, n, dialect)).map_err(|p| {
                format!(
                    "answer parser panicked on input {i} {text:?}: {}",
                    panic_text(&p)
                )
            })?;
            match a.choice_index {
                Some(c) => ensure!(c < n, "input {i} {text:?}: choice {c} out of {n}"),
                None => ensure!(
                    matches!(a.parse_path, ParsePath::Unparsed | ParsePath::FreeText),
                    "input {i}: no choice but path {:?}",
                    a.parse_path
                ),
            }
        }
    }
    Ok(format!(
        "{inputs} inputs per parser, 0 violations, {fallbacks} selection fallbacks"
    ))
}

// ---- 4 ----

fn mock_gateway(script: MockScript) -> Gateway {
    Gateway::new(Arc::new(MockBackend::new(script)))
}

fn accuracy(traces: &[RunTrace], records: &[QARecord]) -> Result<f64, String> {
    Ok(score_run(traces, records)
        .map_err(|e| e.to_string())?
        .accuracy)
}

fn run_all(
    gw: &Gateway,
    cfg: &StrategyConfig,
    strategy: Strategy,
    records: &[QARecord],
    frames: u32,
) -> Result<Vec<RunTrace>, String> {
    let pipeline = Pipeline::new(gw, "mock", cfg.clone()).map_err(|e| e.to_string())?;
    records
        .iter()
        .map(|qa| {
            let store = FrameStore::generated(&qa.video_id, frames).map_err(|e| e.to_string())?;
            pipeline
                .run(strategy, &store, qa)
                .map_err(|e| format!("{strategy} {}: {e}", qa.question_id))
        })
        .collect()
}

fn needle_ordering() -> Outcome {
    let spec = SynthSpec::default();
    let bench = generate(&spec).map_err(|e| e.to_string())?;
    let n = spec.frames_per_video;

    // Expected baseline accuracy: share of needles the uniform sample touches.
    let uniform: BTreeSet<FrameId> = uniform_sample(n, 120).into_iter().collect();
    let hits = bench
        .needles
        .iter()
        .filter(|nd| nd.ids().iter().any(|id| uniform.contains(id)))
        .count();
    let expected_baseline = hits as f64 / bench.needles.len() as f64;

    let gw = mock_gateway(bench.script.clone());
    let tcot_cfg = StrategyConfig {
        segments: 12,
        frames_per_segment: n.div_ceil(12),
        uniform_frames: 0,
        ..StrategyConfig::default()
    };
    let tcot = accuracy(
        &run_all(&gw, &tcot_cfg, Strategy::DynamicSegment, &bench.records, n)?,
        &bench.records,
    )?;
    let base = accuracy(
        &run_all(
            &gw,
            &StrategyConfig::default(),
            Strategy::Baseline,
            &bench.records,
            n,
        )?,
        &bench.records,
    )?;
    let summary =
        format!("dynamic-segment {tcot:.2}, baseline {base:.2} (analytic {expected_baseline:.2})");
    ensure!(
        tcot == 1.0,
        "{summary}: dynamic-segment is not exactly 1.00"
    );
    ensure!(
        base == expected_baseline,
        "{summary}: baseline differs from the analytic hit rate"
    );
    ensure!(tcot - base >= 0.5, "{summary}: gap under 0.5");
    Ok(summary)
}

// ---- 5 ----

fn equivalences() -> Outcome {
    let bench = generate(&SynthSpec {
        n_videos: 10,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let gw = mock_gateway(bench.script.clone());
    for u in [0, 8, 120] {
        let cfg = StrategyConfig {
            max_iterations: 1,
            uniform_frames: u,
            ..StrategyConfig::default()
        };
        let single = run_all(&gw, &cfg, Strategy::SingleStep, &bench.records, 2000)?;
        let hier = run_all(&gw, &cfg, Strategy::Hierarchical, &bench.records, 2000)?;
        for (mut h, s) in hier.into_iter().zip(&single) {
            h.strategy = s.strategy.clone();
            let (hj, sj) = (
                serde_json::to_vec(&h).unwrap(),
                serde_json::to_vec(s).unwrap(),
            );
            ensure!(
                hj == sj,
                "hierarchical(t=1) differs from single-step for {} at u={u}",
                s.question_id
            );
        }
    }

    let base = run_all(
        &gw,
        &StrategyConfig::default(),
        Strategy::Baseline,
        &bench.records[..1],
        2000,
    )?;
    let mut checked = 0;
    for n_frames in [1, 7, 119, 120, 121, 2000, 2040, 20_000] {
        for k in [1, 16, 120] {
            let merged = merge_context(&[], n_frames, k, k);
            ensure!(
                merged.frame_ids() == uniform_sample(n_frames, k)
                    && merged.ids_with(Provenance::Selected).is_empty(),
                "merge_context(empty, {n_frames}, {k}, {k}) is not the uniform baseline context"
            );
            checked += 1;
        }
    }
    let merged = merge_context(&[], 2000, 120, 120);
    let (mj, bj) = (
        serde_json::to_vec(&merged).unwrap(),
        serde_json::to_vec(&base[0].final_context).unwrap(),
    );
    ensure!(
        mj == bj,
        "merge_context(empty, 2000, 120, 120) differs from the baseline trace context"
    );
    Ok(format!(
        "{} hierarchical/single-step trace pairs identical; {checked} uniform-only merges equal the baseline",
        bench.records.len() * 3
    ))
}

// ---- 6 ----

fn vote_math() -> Outcome {
    let v = |xs: &[i64]| -> Vec<Option<usize>> {
        xs.iter().map(|&x| (x >= 0).then_some(x as usize)).collect()
    };
    let cases: [(&[i64], Option<(usize, usize)>); 6] = [
        (&[2, 2, 3, 1, 2, 0, 2, 3, 2], Some((2, 5))),
        (&[1, 1, 0], Some((1, 2))),
        (&[0, 0, 1], Some((0, 2))),
        (&[1, 2, 1, 2, 3], Some((1, 2))),
        (&[-1, 3, -1], Some((3, 1))),
        (&[-1, -1, -1], None),
    ];
    for (votes, want) in cases {
        let got = majority_vote(&v(votes)).map(|t| (t.choice, t.count));
        ensure!(got == want, "votes {votes:?}: got {got:?}, want {want:?}");
    }
    let n_votes = StrategyConfig::default().n_votes;
    ensure!(n_votes == 9, "default n_votes is {n_votes}, not 9");
    Ok(format!(
        "{} vote fixtures exact; default n_votes = 9",
        cases.len()
    ))
}

// ---- 7 ----

fn hand_trace(selected: Vec<FrameId>) -> RunTrace {
    let calls = vec![CallRecord {
        role: CallRole::Answer,
        segment: None,
        presented: selected.clone(),
        visual_tokens: 0,
        text_tokens: 1,
        text_tokens_estimated: false,
        cache_hit: false,
        selection: None,
        error: None,
    }];
    let final_context = tcot_core::frames::ContextSet::tagged(&selected, Provenance::Selected);
    RunTrace {
        trace_schema: TRACE_SCHEMA,
        question_id: "q".into(),
        video_id: "vid".into(),
        strategy: "single-step".into(),
        params: StrategyConfig::default(),
        frame_count: 2000,
        totals: TraceTotals::from_calls(&calls),
        calls,
        selected_ids_initial: Some(selected),
        selection_pool_size: Some(120),
        final_context,
        answer: tcot_core::prompting::AnswerOutput {
            choice_index: Some(0),
            raw_text: String::new(),
            parse_path: ParsePath::FinalAnswerPattern,
        },
        votes: None,
        judge: None,
    }
}

fn metrics_hand_check() -> Outcome {
    let record = QARecord {
        question_id: "q".into(),
        video_id: "vid".into(),
        question: "?".into(),
        options: vec!["a".into(), "b".into()],
        answer_index: Some(0),
        answer_text: None,
        question_type: None,
        reference_spans: Some(vec![[15.0, 25.0]]),
    };
    let pr = selection_precision_recall(&hand_trace(vec![10, 20, 30]), &record)
        .map_err(|e| e.to_string())?;
    ensure!(
        (pr.precision - 1.0 / 3.0).abs() <= 1e-9,
        "precision {} is not 1/3",
        pr.precision
    );
    ensure!(
        (pr.recall - 1.0 / 10.0).abs() <= 1e-9,
        "recall {} is not 1/10",
        pr.recall
    );
    let perfect = selection_precision_recall(&hand_trace((16..=25).collect()), &record)
        .map_err(|e| e.to_string())?;
    ensure!(
        (perfect.precision, perfect.recall) == (1.0, 1.0),
        "exact selection is not 1/1"
    );

    let scores: Vec<_> = ["5", "5", "1"]
        .iter()
        .map(|s| parse_judge_score(s))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mean = mean_normalized(&scores).ok_or("no judge scores")?;
    ensure!(
        (mean - 66.67).abs() <= 0.01,
        "judge mean {mean} is not 66.67"
    );
    let ends: Vec<f64> = ["1", "3", "5"]
        .iter()
        .map(|s| parse_judge_score(s).map(|j| j.normalized))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(ends == [0.0, 50.0, 100.0], "judge normalization {ends:?}");
    Ok(format!(
        "precision {:.9}, recall {:.9}, judge mean {mean:.2}",
        pr.precision, pr.recall
    ))
}

// ---- 8 ----

fn tcot(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tcot"))
        .args(args)
        .output()
        .map_err(|e| format!("spawning tcot: {e}"))?;
    ensure!(
        out.status.success(),
        "tcot {}: {}\n{}",
        args.join(" "),
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec_path = tmp.path().join("spec.json");
    let spec = SynthSpec {
        n_videos: 20,
        write_frames: false,
        ..SynthSpec::default()
    };
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).map_err(|e| e.to_string())?;
    let bench = tmp.path().join("bench");
    tcot(&[
        "synth",
        "--spec",
        path_str(&spec_path),
        "--out",
        path_str(&bench),
    ])?;
    let config = bench.join("config.json");
    let (a, b) = (tmp.path().join("run-a"), tmp.path().join("run-b"));
    tcot(&["run", "--config", path_str(&config), "--out", path_str(&a)])?;
    tcot(&["run", "--config", path_str(&config), "--out", path_str(&b)])?;

    let mut sizes = Vec::new();
    for file in [TRACES_FILE, REPORT_JSON_FILE] {
        let x = std::fs::read(a.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let y = std::fs::read(b.join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure!(!x.is_empty(), "{file} is empty");
        ensure!(x == y, "{file} differs between the two runs");
        sizes.push(format!("{file} {} bytes", x.len()));
    }
    Ok(format!(
        "two runs over {} questions byte-identical: {}",
        spec.n_videos,
        sizes.join(", ")
    ))
}

// ---- 9 ----

fn token_accounting() -> Outcome {
    let bench = generate(&SynthSpec {
        n_videos: 20,
        frames_per_video: 2040,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let gw = mock_gateway(bench.script.clone());
    let cfg = StrategyConfig::default();
    let tpf = u64::from(cfg.budget.tokens_per_frame);

    let base = run_all(&gw, &cfg, Strategy::Baseline, &bench.records, 2040)?;
    for t in &base {
        for c in t.calls_with(CallRole::Answer) {
            ensure!(
                c.visual_tokens == 30_960,
                "{}: baseline answer call has {} visual tokens",
                t.question_id,
                c.visual_tokens
            );
        }
    }
    let dynamic = run_all(&gw, &cfg, Strategy::DynamicSegment, &bench.records, 2040)?;
    for t in &dynamic {
        let want =
            (u64::from(cfg.segments * cfg.frames_per_segment) + t.final_context.len() as u64) * tpf;
        ensure!(
            t.totals.visual_tokens == want,
            "{}: dynamic-segment total {} != (768 + {}) * 258 = {want}",
            t.question_id,
            t.totals.visual_tokens,
            t.final_context.len()
        );
    }
    Ok(format!(
        "{} baseline traces at 30960 per answer call; {} dynamic-segment totals equal (768 + |c|) * 258",
        base.len(),
        dynamic.len()
    ))
}

// ---- 10 ----

/// Needs `TCOT_API_KEY` (or whatever key variable the config names) and
/// `TCOT_LIVE_CONFIG`, a run config for a real backend.
fn live_smoke() -> Outcome {
    let (Some(_), Some(config)) = (
        std::env::var_os("TCOT_API_KEY"),
        std::env::var_os("TCOT_LIVE_CONFIG"),
    ) else {
        return Ok(format!(
            "{SKIPPED} set TCOT_API_KEY and TCOT_LIVE_CONFIG to run"
        ));
    };
    let cfg = ExperimentConfig::load(Path::new(&config)).map_err(|e| e.to_string())?;
    let records = load_dataset(&cfg.dataset).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let slice = tmp.path().join("slice.jsonl");
    let lines: Vec<String> = records
        .iter()
        .take(20)
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    std::fs::write(&slice, lines.join("\n") + "\n").map_err(|e| e.to_string())?;

    let mut results = Vec::new();
    for strategy in ["baseline", "dynamic-segment"] {
        let mut c = cfg.clone();
        c.dataset = slice.clone();
        c.dataset_sha256 = None;
        c.strategy = strategy.into();
        let out = tmp.path().join(strategy);
        run_command(
            c,
            &RunOptions {
                force: true,
                output_dir: Some(out.clone()),
            },
        )
        .map_err(|e| format!("{strategy}: {e}"))?;
        let report: RunReport = serde_json::from_slice(
            &std::fs::read(out.join(REPORT_JSON_FILE)).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let calls: usize = read_traces(&out.join(TRACES_FILE))
            .map_err(|e| e.to_string())?
            .iter()
            .map(|t| t.calls.len())
            .sum();
        let failed = report.metrics.failed_calls as f64 / calls.max(1) as f64;
        ensure!(
            failed < 0.01,
            "{strategy}: {:.1}% failed calls",
            failed * 100.0
        );
        results.push(report.metrics.accuracy);
    }
    let (base, tcot) = (results[0], results[1]);
    ensure!(
        tcot >= base - 0.05,
        "dynamic-segment {tcot:.2} below baseline {base:.2} minus 5 points"
    );
    Ok(format!("dynamic-segment {tcot:.2} vs baseline {base:.2}"))
}
