use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FrameError, FrameId};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Optional per-video manifest; overrides directory scanning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub video_id: String,
    pub frame_count: u32,
    /// No frame files: payloads come from [`synthetic_frame_jpeg`].
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

/// File name of a frame inside its video directory, e.g. `000042.jpg`.
pub fn frame_file_name(id: FrameId) -> String {
    format!("{id:06}.jpg")
}

/// Encoded bytes of one frame, tagged with the id it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePayload {
    pub frame_id: FrameId,
    pub bytes: Arc<[u8]>,
}

#[derive(Debug, Clone)]
enum Source {
    Directory(PathBuf),
    /// Encoded lazily, once per frame; clones share the memo.
    Generated {
        side: u32,
        memo: Arc<[OnceLock<Arc<[u8]>>]>,
    },
}

/// All 1 fps frames of one video, addressed by 1-based [`FrameId`].
#[derive(Debug, Clone)]
pub struct FrameStore {
    video_id: String,
    frame_count: u32,
    source: Source,
}

impl FrameStore {
    /// Opens `<frames_root>/<video_id>/`, trusting `manifest.json` when present
    /// and otherwise scanning for `%06d.jpg` files that must cover `1..=N`.
    pub fn open(frames_root: &Path, video_id: &str) -> Result<Self, FrameError> {
        let dir = frames_root.join(video_id);
        if !dir.is_dir() {
            return Err(FrameError::MissingVideo {
                video_id: video_id.to_string(),
                dir,
            });
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let (frame_count, synthetic) = if manifest_path.is_file() {
            let text = fs::read_to_string(&manifest_path)
                .map_err(|e| FrameError::io(&manifest_path, e))?;
            let manifest: FrameManifest =
                serde_json::from_str(&text).map_err(|e| FrameError::Manifest {
                    path: manifest_path.clone(),
                    reason: e.to_string(),
                })?;
            if manifest.video_id != video_id {
                return Err(FrameError::Manifest {
                    path: manifest_path,
                    reason: format!("manifest names video '{}'", manifest.video_id),
                });
            }
            (manifest.frame_count, manifest.synthetic)
        } else {
            (scan_frame_count(&dir)?, false)
        };
        if frame_count == 0 {
            return Err(FrameError::EmptyVideo(video_id.to_string()));
        }
        if synthetic {
            return Self::generated(video_id, frame_count);
        }
        for id in 1..=frame_count {
            let p = dir.join(frame_file_name(id));
            if !p.is_file() {
                return Err(FrameError::MissingFrame {
                    video_id: video_id.to_string(),
                    frame_id: id,
                });
            }
        }
        Ok(Self {
            video_id: video_id.to_string(),
            frame_count,
            source: Source::Directory(dir),
        })
    }

    /// An in-memory store whose payloads are the procedural images that
    /// [`synthetic_frame_jpeg`] writes for the synthetic benchmark.
    pub fn generated(video_id: &str, frame_count: u32) -> Result<Self, FrameError> {
        if frame_count == 0 {
            return Err(FrameError::EmptyVideo(video_id.to_string()));
        }
        Ok(Self {
            video_id: video_id.to_string(),
            frame_count,
            source: Source::Generated {
                side: SYNTH_SIDE,
                memo: (0..frame_count).map(|_| OnceLock::new()).collect(),
            },
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    pub fn path(&self, id: FrameId) -> Option<PathBuf> {
        match &self.source {
            Source::Directory(dir) => Some(dir.join(frame_file_name(id))),
            Source::Generated { .. } => None,
        }
    }

    pub fn load(&self, id: FrameId) -> Result<FramePayload, FrameError> {
        if !(1..=self.frame_count).contains(&id) {
            return Err(FrameError::OutOfRange {
                frame_id: id,
                frame_count: self.frame_count,
            });
        }
        let bytes: Arc<[u8]> = match &self.source {
            Source::Directory(dir) => {
                let p = dir.join(frame_file_name(id));
                fs::read(&p).map_err(|e| FrameError::io(&p, e))?.into()
            }
            Source::Generated { side, memo } => memo[(id - 1) as usize]
                .get_or_init(|| synthetic_frame_jpeg(&self.video_id, id, *side).into())
                .clone(),
        };
        Ok(FramePayload {
            frame_id: id,
            bytes,
        })
    }

    pub fn load_many(&self, ids: &[FrameId]) -> Result<Vec<FramePayload>, FrameError> {
        ids.iter().map(|&id| self.load(id)).collect()
    }
}

fn scan_frame_count(dir: &Path) -> Result<u32, FrameError> {
    let mut max = 0u32;
    let mut count = 0u32;
    for entry in fs::read_dir(dir).map_err(|e| FrameError::io(dir, e))? {
        let entry = entry.map_err(|e| FrameError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_suffix(".jpg") else {
            continue;
        };
        if stem.len() != 6 || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let id: u32 = stem.parse().unwrap_or(0);
        if id == 0 {
            continue;
        }
        max = max.max(id);
        count += 1;
    }
    if count != max {
        return Err(FrameError::Manifest {
            path: dir.to_path_buf(),
            reason: format!("found {count} frame files but highest id is {max}"),
        });
    }
    Ok(max)
}

/// Edge length of generated frames, in pixels.
pub const SYNTH_SIDE: u32 = 16;

/// A solid-colour JPEG whose colour derives from `(video_id, id)`, with the
/// frame index written as a bit pattern along the top row.
pub fn synthetic_frame_jpeg(video_id: &str, id: FrameId, side: u32) -> Vec<u8> {
    let side = side.max(8);
    let digest = Sha256::new()
        .chain_update(video_id.as_bytes())
        .chain_update(id.to_le_bytes())
        .finalize();
    let color = [digest[0], digest[1], digest[2]];
    let mut pixels = Vec::with_capacity((side * side * 3) as usize);
    for y in 0..side {
        for x in 0..side {
            if y == 0 && x < 32.min(side) {
                let bit = (id >> (x % 32)) & 1;
                let v = if bit == 1 { 255 } else { 0 };
                pixels.extend_from_slice(&[v, v, v]);
            } else {
                pixels.extend_from_slice(&color);
            }
        }
    }
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, 90)
        .encode(&pixels, side, side, ExtendedColorType::Rgb8)
        .expect("in-memory jpeg encoding");
    out
}

/// Writes a generated video directory: `manifest.json` plus one JPEG per frame.
pub fn write_synthetic_video(
    frames_root: &Path,
    video_id: &str,
    frame_count: u32,
) -> Result<PathBuf, FrameError> {
    let dir = frames_root.join(video_id);
    fs::create_dir_all(&dir).map_err(|e| FrameError::io(&dir, e))?;
    for id in 1..=frame_count {
        let p = dir.join(frame_file_name(id));
        fs::write(&p, synthetic_frame_jpeg(video_id, id, SYNTH_SIDE))
            .map_err(|e| FrameError::io(&p, e))?;
    }
    let manifest = FrameManifest {
        video_id: video_id.to_string(),
        frame_count,
        synthetic: false,
    };
    let p = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&p, text).map_err(|e| FrameError::io(&p, e))?;
    Ok(dir)
}
