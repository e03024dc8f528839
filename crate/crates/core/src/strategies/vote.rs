use std::collections::BTreeMap;

/// Outcome of a majority vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteTally {
    pub choice: usize,
    pub count: usize,
}

/// Most frequent parsed choice. Ties go to the smallest option index;
/// unparsed votes (`None`) are ignored. Returns `None` when no vote parsed.
pub fn majority_vote(votes: &[Option<usize>]) -> Option<VoteTally> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in votes.iter().flatten() {
        *counts.entry(*v).or_default() += 1;
    }
    // BTreeMap iterates in ascending key order, so the strict `>` keeps the
    // smallest index among equals.
    counts.into_iter().fold(
        None,
        |best: Option<VoteTally>, (choice, count)| match best {
            Some(b) if b.count >= count => Some(b),
            _ => Some(VoteTally { choice, count }),
        },
    )
}

/// Seed of one self-consistency run, derived from the run seed and the
/// 0-based vote index.
pub fn vote_seed(rng_seed: u64, vote: u32) -> u64 {
    // splitmix64 finaliser over the combined input.
    let mut z = rng_seed ^ (u64::from(vote) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
