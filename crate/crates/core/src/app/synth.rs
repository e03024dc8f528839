use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BackendSpec, ExperimentConfig};
use super::AppError;
use crate::eval::QARecord;
use crate::frames::{write_synthetic_video, FrameId};
use crate::gateway::{MockMode, MockRoutes, MockScript, RetryPolicy};
use crate::strategies::StrategyConfig;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MOCK_SCRIPT_FILE: &str = "mock_script.json";
pub const FRAMES_DIR: &str = "frames";
pub const EXAMPLE_CONFIG_FILE: &str = "config.json";

const OBJECTS: [&str; 8] = [
    "a red cube",
    "a green sphere",
    "a blue cone",
    "a yellow star",
    "a purple ring",
    "an orange pyramid",
    "a white cylinder",
    "a black torus",
];

fn default_templates() -> Vec<String> {
    vec![
        "Which object briefly appears in video {video}?".to_string(),
        "In video {video}, what is shown during the short inserted clip?".to_string(),
        "What does the camera show for a few seconds in video {video}?".to_string(),
    ]
}

/// Parameters of a needle-in-a-haystack benchmark: each video hides short
/// spans of frames, and each question asks about one span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_videos: u32,
    pub frames_per_video: u32,
    pub needles_per_video: u32,
    /// Frames per needle.
    pub needle_span: u32,
    /// Answer options per question, 2 to 5.
    pub n_options: usize,
    pub seed: u64,
    /// Question texts; `{video}` expands to the video id.
    pub question_templates: Vec<String>,
    /// Write JPEG frames to disk. Otherwise only manifests marked synthetic
    /// are written, and frames are generated in memory when read.
    pub write_frames: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_videos: 50,
            frames_per_video: 2000,
            needles_per_video: 1,
            needle_span: 5,
            n_options: 5,
            seed: 7,
            question_templates: default_templates(),
            write_frames: true,
        }
    }
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::InvalidSynthSpec(m));
        if self.n_videos == 0 || self.frames_per_video == 0 {
            return bad("n_videos and frames_per_video must be at least 1".into());
        }
        if self.needles_per_video == 0 || self.needle_span == 0 {
            return bad("needles_per_video and needle_span must be at least 1".into());
        }
        if self.needle_span > self.frames_per_video {
            return bad(format!(
                "needle span of {} frames does not fit in {} frames",
                self.needle_span, self.frames_per_video
            ));
        }
        if u64::from(self.needle_span) * u64::from(self.needles_per_video)
            > u64::from(self.frames_per_video)
        {
            return bad("needles cannot fit without overlapping".into());
        }
        if !(2..=5).contains(&self.n_options) {
            return bad(format!(
                "n_options must be between 2 and 5, got {}",
                self.n_options
            ));
        }
        if self.question_templates.is_empty() {
            return bad("at least one question template is required".into());
        }
        Ok(())
    }
}

/// One planted needle and the question about it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Needle {
    pub question_id: String,
    pub video_id: String,
    pub first: FrameId,
    pub last: FrameId,
    pub correct_idx: usize,
    pub distractor_idx: usize,
}

impl Needle {
    pub fn ids(&self) -> Vec<FrameId> {
        (self.first..=self.last).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchmark {
    pub records: Vec<QARecord>,
    pub needles: Vec<Needle>,
    pub script: MockScript,
}

fn video_id(i: u32) -> String {
    format!("synth-{i:04}")
}

/// Non-overlapping needle starts, sorted ascending.
fn place_needles(rng: &mut ChaCha8Rng, frames: u32, count: u32, span: u32) -> Vec<FrameId> {
    // Choose starts among the slack positions, then shift each by the spans
    // before it; this is uniform over non-overlapping placements.
    let slack = frames - count * span;
    let mut offsets: Vec<u32> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    offsets
        .iter()
        .enumerate()
        .map(|(j, off)| off + j as u32 * span + 1)
        .collect()
}

fn needle_routes(needle: &Needle, span: u32) -> MockRoutes {
    let ids = needle.ids();
    let answer = |abstain: bool| MockMode::NeedleAnswer {
        relevant_ids: ids.clone(),
        required_fraction: 1.0 / f64::from(span),
        correct_idx: needle.correct_idx,
        distractor_idx: needle.distractor_idx,
        abstain_when_absent: abstain,
    };
    MockRoutes {
        select: Some(MockMode::OracleSelect {
            relevant_ids: ids.clone(),
            caption_keyword: None,
        }),
        answer: Some(answer(false)),
        segment_answer: Some(answer(true)),
        ..MockRoutes::default()
    }
}

/// Generates the benchmark in memory. Same spec, same output.
pub fn generate(spec: &SynthSpec) -> Result<SynthBenchmark, AppError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::new();
    let mut needles = Vec::new();
    let mut questions = BTreeMap::new();
    for v in 0..spec.n_videos {
        let vid = video_id(v);
        let starts = place_needles(
            &mut rng,
            spec.frames_per_video,
            spec.needles_per_video,
            spec.needle_span,
        );
        for (j, start) in starts.into_iter().enumerate() {
            let mut objects = OBJECTS.to_vec();
            objects.shuffle(&mut rng);
            let options: Vec<String> = objects[..spec.n_options]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let correct_idx = rng.random_range(0..spec.n_options);
            let template =
                &spec.question_templates[rng.random_range(0..spec.question_templates.len())];
            let needle = Needle {
                question_id: format!("{vid}-q{j}"),
                video_id: vid.clone(),
                first: start,
                last: start + spec.needle_span - 1,
                correct_idx,
                distractor_idx: (correct_idx + 1) % spec.n_options,
            };
            records.push(QARecord {
                question_id: needle.question_id.clone(),
                video_id: vid.clone(),
                question: template.replace("{video}", &vid),
                options,
                answer_index: Some(correct_idx),
                answer_text: None,
                question_type: Some("needle".to_string()),
                // Seconds whose frame mapping is exactly first..=last.
                reference_spans: Some(vec![[f64::from(needle.first - 1), f64::from(needle.last)]]),
            });
            questions.insert(
                needle.question_id.clone(),
                needle_routes(&needle, spec.needle_span),
            );
            needles.push(needle);
        }
    }
    let script = MockScript {
        default: MockRoutes {
            caption: Some(MockMode::FixedText {
                text: "A plain colored frame, number {frame_id}.".to_string(),
            }),
            aggregate: Some(MockMode::EchoAnswer { fallback: None }),
            judge: Some(MockMode::FixedText {
                text: "3".to_string(),
            }),
            ..MockRoutes::default()
        },
        videos: BTreeMap::new(),
        questions,
    };
    Ok(SynthBenchmark {
        records,
        needles,
        script,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Where [`synth_benchmark`] put things.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub dataset: PathBuf,
    pub frames_root: PathBuf,
    pub mock_script: PathBuf,
    pub example_config: PathBuf,
}

/// Writes the dataset, frames, mock script and an example run config under
/// `out_dir`.
pub fn synth_benchmark(spec: &SynthSpec, out_dir: &Path) -> Result<SynthOutput, AppError> {
    let bench = generate(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;

    let dataset = out_dir.join(DATASET_FILE);
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&dataset).map_err(|e| AppError::io(&dataset, e))?,
    );
    for r in &bench.records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(file, "{line}").map_err(|e| AppError::io(&dataset, e))?;
    }
    file.flush().map_err(|e| AppError::io(&dataset, e))?;

    let frames_root = out_dir.join(FRAMES_DIR);
    for v in 0..spec.n_videos {
        let vid = video_id(v);
        if spec.write_frames {
            write_synthetic_video(&frames_root, &vid, spec.frames_per_video)?;
        } else {
            let dir = frames_root.join(&vid);
            std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
            write_json(
                &dir.join(crate::frames::MANIFEST_FILE),
                &crate::frames::FrameManifest {
                    video_id: vid.clone(),
                    frame_count: spec.frames_per_video,
                    synthetic: true,
                },
            )?;
        }
    }

    let mock_script = out_dir.join(MOCK_SCRIPT_FILE);
    write_json(&mock_script, &bench.script)?;

    let example_config = out_dir.join(EXAMPLE_CONFIG_FILE);
    let cfg = ExperimentConfig {
        dataset: PathBuf::from(DATASET_FILE),
        dataset_sha256: None,
        frames_root: PathBuf::from(FRAMES_DIR),
        strategy: "dynamic-segment".to_string(),
        strategy_config: StrategyConfig::default(),
        backend: BackendSpec::Mock {
            model_id: "mock-vlm".to_string(),
            mock_script: PathBuf::from(MOCK_SCRIPT_FILE),
        },
        embedding: None,
        judge: None,
        cache_dir: None,
        retry: RetryPolicy::default(),
        parallelism: 4,
        rng_seed: spec.seed,
        output_dir: PathBuf::from("runs/dynamic-segment"),
        max_failure_fraction: 0.05,
    };
    write_json(&example_config, &cfg)?;

    Ok(SynthOutput {
        dataset,
        frames_root,
        mock_script,
        example_config,
    })
}
