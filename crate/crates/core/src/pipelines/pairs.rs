use std::collections::BTreeSet;

use crate::mapping::{bow_similarity, BowVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMethod {
    /// Each frame with its highest-similarity other frame.
    MostSimilar,
    /// Each frame with the next one.
    Consecutive,
}

/// Index of the most similar entry of `database` (ties: lowest index),
/// skipping `exclude`.
pub fn most_similar(query: &BowVector, database: &[BowVector], exclude: Option<usize>) -> Option<(usize, f64)> {
    database
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(j, b)| (j, bow_similarity(query, b)))
        .fold(None, |best: Option<(usize, f64)>, (j, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((j, s)),
        })
}

/// Frame pairs (by id). Unordered duplicates are dropped; the first
/// occurrence's orientation is kept.
pub fn pair_selection(frames: &[(u64, BowVector)], method: PairMethod) -> Vec<(u64, u64)> {
    let bows: Vec<BowVector> = frames.iter().map(|f| f.1.clone()).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for i in 0..frames.len() {
        let j = match method {
            PairMethod::MostSimilar => match most_similar(&bows[i], &bows, Some(i)) {
                Some((j, _)) => j,
                None => continue,
            },
            PairMethod::Consecutive if i + 1 < frames.len() => i + 1,
            PairMethod::Consecutive => continue,
        };
        let (a, b) = (frames[i].0, frames[j].0);
        if seen.insert((a.min(b), a.max(b))) {
            out.push((a, b));
        }
    }
    out
}
