//! Slow, obviously-correct reimplementations of the frame arithmetic.
//!
//! Each works from the geometric definition (frames as unit time intervals,
//! bins as equal-width intervals) rather than from the closed forms used in
//! the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use tcot_core::frames::{ContextSet, Provenance};
use tcot_core::FrameId;

/// Frame `j` covers `[j-1, j)`. Bin `i` of `n` covers `[(i-1)N/n, iN/n)`;
/// pick the frame whose interval holds the bin's midpoint. All comparisons
/// are scaled by `2n` to stay in integers.
pub fn uniform_sample(frame_count: u32, n: u32) -> Vec<FrameId> {
    let n = n.min(frame_count) as u64;
    let big_n = frame_count as u64;
    let mut out = Vec::new();
    let mut j = 1u64;
    for i in 1..=n {
        let mid = (2 * i - 1) * big_n;
        while !((j - 1) * 2 * n <= mid && mid < j * 2 * n) {
            j += 1;
            assert!(j <= big_n, "midpoint escaped the video");
        }
        out.push(j as FrameId);
    }
    out
}

/// Deals frames to segments one at a time, round robin, to get the sizes,
/// then lays the segments end to end. Returns `(first, last)` pairs.
pub fn partition_segments(frame_count: u32, segments: u32) -> Option<Vec<(FrameId, FrameId)>> {
    if segments == 0 || segments > frame_count {
        return None;
    }
    let mut sizes = vec![0u32; segments as usize];
    for f in 0..frame_count {
        sizes[(f % segments) as usize] += 1;
    }
    let mut out = Vec::new();
    let mut next = 1;
    for s in sizes {
        out.push((next, next + s - 1));
        next += s;
    }
    Some(out)
}

pub fn subsample_to_limit(ids: &[FrameId], max_count: u32) -> Vec<FrameId> {
    if ids.len() <= max_count as usize {
        return ids.to_vec();
    }
    uniform_sample(ids.len() as u32, max_count)
        .into_iter()
        .map(|pos| ids[pos as usize - 1])
        .collect()
}

/// Set union keyed by frame id; a selected tag wins over a uniform one.
pub fn merge_context(
    selected: &[FrameId],
    frame_count: u32,
    budget_k: u32,
    uniform: u32,
) -> ContextSet {
    let mut clean: Vec<FrameId> = selected
        .iter()
        .copied()
        .filter(|&id| id >= 1 && id <= frame_count)
        .collect();
    clean.sort();
    clean.dedup();
    let mut tags: BTreeMap<FrameId, Provenance> = BTreeMap::new();
    for id in uniform_sample(frame_count, uniform) {
        tags.insert(id, Provenance::Uniform);
    }
    for id in subsample_to_limit(&clean, budget_k - uniform) {
        tags.insert(id, Provenance::Selected);
    }
    let mut out = ContextSet::default();
    for (id, source) in tags {
        out.frames
            .push(tcot_core::frames::ContextFrame { id, source });
    }
    out
}

/// Union of clamped windows, by marking every covered frame.
pub fn expand_neighborhood(ids: &[FrameId], radius: u32, frame_count: u32) -> Vec<FrameId> {
    let mut covered = vec![false; frame_count as usize + 1];
    for &i in ids {
        if i < 1 || i > frame_count {
            continue;
        }
        let lo = i.saturating_sub(radius).max(1);
        let hi = i.saturating_add(radius).min(frame_count);
        for f in lo..=hi {
            covered[f as usize] = true;
        }
    }
    (1..=frame_count).filter(|&f| covered[f as usize]).collect()
}
