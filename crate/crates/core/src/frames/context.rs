use serde::{Deserialize, Serialize};

use super::sampling::{subsample_to_limit, uniform_sample};
use super::FrameId;

/// Why a frame is in the answering context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Selected,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFrame {
    pub id: FrameId,
    pub source: Provenance,
}

/// The curated frames handed to the answering call, strictly ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSet {
    pub frames: Vec<ContextFrame>,
}

impl ContextSet {
    pub fn from_uniform(ids: &[FrameId]) -> Self {
        Self::tagged(ids, Provenance::Uniform)
    }

    pub fn tagged(ids: &[FrameId], source: Provenance) -> Self {
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        Self {
            frames: sorted
                .into_iter()
                .map(|id| ContextFrame { id, source })
                .collect(),
        }
    }

    pub fn frame_ids(&self) -> Vec<FrameId> {
        self.frames.iter().map(|f| f.id).collect()
    }

    pub fn ids_with(&self, source: Provenance) -> Vec<FrameId> {
        self.frames
            .iter()
            .filter(|f| f.source == source)
            .map(|f| f.id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Builds the answering context: the selection thinned to `budget_k - uniform`
/// frames, unioned with `uniform` evenly spaced frames from the whole video.
///
/// Frames present in both halves appear once, tagged [`Provenance::Selected`].
/// Out-of-range selections are ignored.
pub fn merge_context(
    selected: &[FrameId],
    frame_count: u32,
    budget_k: u32,
    uniform: u32,
) -> ContextSet {
    let uniform = uniform.min(budget_k);
    let mut picked: Vec<FrameId> = selected
        .iter()
        .copied()
        .filter(|&id| (1..=frame_count).contains(&id))
        .collect();
    picked.sort_unstable();
    picked.dedup();
    let picked = subsample_to_limit(&picked, budget_k - uniform);
    let spread = uniform_sample(frame_count, uniform);

    let mut frames = Vec::with_capacity(picked.len() + spread.len());
    let (mut a, mut b) = (picked.iter().peekable(), spread.iter().peekable());
    loop {
        let next = match (a.peek(), b.peek()) {
            (Some(&&x), Some(&&y)) if x == y => {
                a.next();
                b.next();
                ContextFrame {
                    id: x,
                    source: Provenance::Selected,
                }
            }
            (Some(&&x), Some(&&y)) if x < y => {
                a.next();
                ContextFrame {
                    id: x,
                    source: Provenance::Selected,
                }
            }
            (Some(_), Some(&&y)) => {
                b.next();
                ContextFrame {
                    id: y,
                    source: Provenance::Uniform,
                }
            }
            (Some(&&x), None) => {
                a.next();
                ContextFrame {
                    id: x,
                    source: Provenance::Selected,
                }
            }
            (None, Some(&&y)) => {
                b.next();
                ContextFrame {
                    id: y,
                    source: Provenance::Uniform,
                }
            }
            (None, None) => break,
        };
        frames.push(next);
    }
    ContextSet { frames }
}
