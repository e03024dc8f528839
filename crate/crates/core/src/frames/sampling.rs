//! Index arithmetic over 1-based frame ids.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FrameError, FrameId};

/// Picks `n` frames spread evenly over `1..=frame_count`.
///
/// Each of the `n` equal-width bins contributes the frame at its centre:
/// `id_i = 1 + floor((i - 0.5) * N / n)`. When `n > N` the count is clamped to `N`
/// and every frame is returned. `n == 0` yields an empty list.
pub fn uniform_sample(frame_count: u32, n: u32) -> Vec<FrameId> {
    if frame_count == 0 || n == 0 {
        return Vec::new();
    }
    let n = if n > frame_count {
        tracing::debug!(
            frame_count,
            requested = n,
            "uniform sample clamped to frame count"
        );
        frame_count
    } else {
        n
    };
    let big_n = u64::from(frame_count);
    let den = 2 * u64::from(n);
    (1..=u64::from(n))
        .map(|i| (1 + (2 * i - 1) * big_n / den) as FrameId)
        .collect()
}

/// A contiguous run of frames `first..=last` within a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// 1-based position of the segment in its partition.
    pub index: u32,
    pub first: FrameId,
    pub last: FrameId,
}

impl Segment {
    pub fn len(&self) -> u32 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: FrameId) -> bool {
        (self.first..=self.last).contains(&id)
    }

    /// Uniformly samples `n` frames inside the segment, as global ids.
    pub fn sample(&self, n: u32) -> Vec<FrameId> {
        uniform_sample(self.len(), n)
            .into_iter()
            .map(|local| self.first + local - 1)
            .collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = FrameId> {
        self.first..=self.last
    }
}

/// Splits `1..=frame_count` into `segments` contiguous pieces.
///
/// When the division is uneven, the first `frame_count % segments` pieces hold
/// one extra frame.
pub fn partition_segments(frame_count: u32, segments: u32) -> Result<Vec<Segment>, FrameError> {
    if segments < 1 || segments > frame_count {
        return Err(FrameError::InvalidPartition {
            frame_count,
            segments,
        });
    }
    let base = frame_count / segments;
    let extra = frame_count % segments;
    let mut out = Vec::with_capacity(segments as usize);
    let mut first = 1;
    for index in 1..=segments {
        let len = base + u32::from(index <= extra);
        out.push(Segment {
            index,
            first,
            last: first + len - 1,
        });
        first += len;
    }
    Ok(out)
}

/// Splits `1..=frame_count` into consecutive windows of `window` frames; the
/// last window may be shorter. Yields `ceil(N / window)` segments.
pub fn fixed_windows(frame_count: u32, window: u32) -> Result<Vec<Segment>, FrameError> {
    if window == 0 || frame_count == 0 {
        return Err(FrameError::InvalidPartition {
            frame_count,
            segments: 0,
        });
    }
    let count = frame_count.div_ceil(window);
    Ok((0..count)
        .map(|i| Segment {
            index: i + 1,
            first: i * window + 1,
            last: ((i + 1) * window).min(frame_count),
        })
        .collect())
}

/// Thins an ascending id list to at most `max_count` entries by uniformly
/// sampling positions within the list. Lists already within the limit are
/// returned unchanged.
pub fn subsample_to_limit(ids: &[FrameId], max_count: u32) -> Vec<FrameId> {
    if ids.len() <= max_count as usize {
        return ids.to_vec();
    }
    uniform_sample(ids.len() as u32, max_count)
        .into_iter()
        .map(|pos| ids[pos as usize - 1])
        .collect()
}

/// Union of the windows `[i - radius, i + radius]` around every id, clamped to
/// `1..=frame_count`, ascending and without duplicates.
pub fn expand_neighborhood<'a, I>(ids: I, radius: u32, frame_count: u32) -> Vec<FrameId>
where
    I: IntoIterator<Item = &'a FrameId>,
{
    let centres: BTreeSet<FrameId> = ids
        .into_iter()
        .copied()
        .filter(|&i| (1..=frame_count).contains(&i))
        .collect();
    let mut out: Vec<FrameId> = Vec::new();
    for c in centres {
        let lo = c.saturating_sub(radius).max(1);
        let hi = c.saturating_add(radius).min(frame_count);
        let start = match out.last() {
            Some(&last) if last >= lo => last + 1,
            _ => lo,
        };
        out.extend(start..=hi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sample_examples() {
        assert_eq!(uniform_sample(10, 5), vec![2, 4, 6, 8, 10]);
        assert_eq!(uniform_sample(7, 7), (1..=7).collect::<Vec<_>>());
        let ids = uniform_sample(340, 64);
        assert_eq!(ids.len(), 64);
        assert_eq!(ids[0], 3);
        assert_eq!(ids[63], 338);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn uniform_sample_clamps_and_handles_zero() {
        assert_eq!(uniform_sample(3, 10), vec![1, 2, 3]);
        assert!(uniform_sample(5, 0).is_empty());
        assert_eq!(uniform_sample(1, 1), vec![1]);
    }

    #[test]
    fn partition_examples() {
        let segs = partition_segments(4080, 12).unwrap();
        assert_eq!(segs.len(), 12);
        for (i, s) in segs.iter().enumerate() {
            let i = i as u32 + 1;
            assert_eq!((s.first, s.last), ((i - 1) * 340 + 1, i * 340));
        }
        assert_eq!(
            partition_segments(10, 1).unwrap(),
            vec![Segment {
                index: 1,
                first: 1,
                last: 10
            }]
        );
        let ranges: Vec<_> = partition_segments(11, 3)
            .unwrap()
            .iter()
            .map(|s| (s.first, s.last))
            .collect();
        assert_eq!(ranges, vec![(1, 4), (5, 8), (9, 11)]);
    }

    #[test]
    fn partition_rejects_bad_counts() {
        assert!(matches!(
            partition_segments(5, 6),
            Err(FrameError::InvalidPartition { .. })
        ));
        assert!(partition_segments(5, 0).is_err());
    }

    #[test]
    fn fixed_windows_cover_with_short_tail() {
        let w = fixed_windows(2040, 64).unwrap();
        assert_eq!(w.len(), 32);
        assert_eq!(w.last().unwrap().first, 31 * 64 + 1);
        assert_eq!(w.last().unwrap().last, 2040);
        assert_eq!(w.last().unwrap().len(), 56);
    }

    #[test]
    fn subsample_examples() {
        assert_eq!(subsample_to_limit(&[5, 6, 7], 10), vec![5, 6, 7]);
        let ids: Vec<FrameId> = (1..=10).collect();
        assert!(subsample_to_limit(&ids, 0).is_empty());

        let ids: Vec<FrameId> = (101..=300).collect();
        let expected: Vec<FrameId> = uniform_sample(200, 100)
            .into_iter()
            .map(|p| ids[p as usize - 1])
            .collect();
        assert_eq!(subsample_to_limit(&ids, 100), expected);
    }

    #[test]
    fn neighborhood_examples() {
        let mut want: Vec<FrameId> = (7..=13).collect();
        want.extend(47..=53);
        assert_eq!(expand_neighborhood(&[10, 50], 3, 100), want);
        assert_eq!(
            expand_neighborhood(&[1], 5, 100),
            (1..=6).collect::<Vec<_>>()
        );
        assert_eq!(
            expand_neighborhood(&[10, 12], 2, 100),
            (8..=14).collect::<Vec<_>>()
        );
        assert_eq!(
            expand_neighborhood(&[99], 5, 100),
            (94..=100).collect::<Vec<_>>()
        );
        assert_eq!(expand_neighborhood(&[4, 9], 0, 100), vec![4, 9]);
    }
}
