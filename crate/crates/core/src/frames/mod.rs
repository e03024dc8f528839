//! Frame-index arithmetic: sampling, partitioning, token budgets and context
//! merging, plus access to the pre-extracted frames of a video.
//!
//! Every function here is pure. Frame ids are 1-based and refer to frames
//! extracted at one frame per second.

mod budget;
mod context;
mod sampling;
mod store;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use budget::{frames_for_budget, TokenBudget};
pub use context::{merge_context, ContextFrame, ContextSet, Provenance};
pub use sampling::{
    expand_neighborhood, fixed_windows, partition_segments, subsample_to_limit, uniform_sample,
    Segment,
};
pub use store::{
    frame_file_name, synthetic_frame_jpeg, write_synthetic_video, FrameManifest, FramePayload,
    FrameStore, MANIFEST_FILE, SYNTH_SIDE,
};

/// 1-based index of a frame sampled at 1 fps.
pub type FrameId = u32;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("cannot split {frame_count} frames into {segments} segments")]
    InvalidPartition { frame_count: u32, segments: u32 },
    #[error("token budget {0:?} leaves room for no frames")]
    BudgetTooSmall(TokenBudget),
    #[error("frame {frame_id} outside 1..={frame_count}")]
    OutOfRange { frame_id: FrameId, frame_count: u32 },
    #[error("no frames directory for video '{video_id}' at {dir}")]
    MissingVideo { video_id: String, dir: PathBuf },
    #[error("video '{0}' has no frames")]
    EmptyVideo(String),
    #[error("video '{video_id}' is missing frame {frame_id}")]
    MissingFrame { video_id: String, frame_id: FrameId },
    #[error("bad manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FrameError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
