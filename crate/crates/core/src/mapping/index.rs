use std::collections::BTreeMap;

use super::{bow_similarity, BowVector, Keyframe, SparseMap};

/// word → (keyframe position, weight), keyframes in map order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvertedIndex {
    postings: BTreeMap<u32, Vec<(usize, f64)>>,
    keyframe_ids: Vec<u64>,
}

impl InvertedIndex {
    pub fn from_keyframes(keyframes: &[Keyframe]) -> Self {
        let mut postings: BTreeMap<u32, Vec<(usize, f64)>> = BTreeMap::new();
        for (i, kf) in keyframes.iter().enumerate() {
            for (&w, &x) in &kf.bow {
                postings.entry(w).or_default().push((i, x));
            }
        }
        Self {
            postings,
            keyframe_ids: keyframes.iter().map(|k| k.id).collect(),
        }
    }

    pub fn postings(&self, word: u32) -> &[(usize, f64)] {
        self.postings.get(&word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Cosine score of every keyframe (vectors are unit-norm).
    pub fn scores(&self, query: &BowVector) -> Vec<f64> {
        let mut s = vec![0.0; self.keyframe_ids.len()];
        for (w, x) in query {
            for &(i, y) in self.postings(*w) {
                s[i] += x * y;
            }
        }
        s
    }
}

fn rank(ids: impl Iterator<Item = u64>, scores: Vec<f64>, n: usize) -> Vec<(u64, f64)> {
    let mut ranked: Vec<(u64, f64)> = ids.zip(scores).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

/// Top-`n` keyframes by cosine similarity (ties: lower id first). An empty
/// query returns nothing.
pub fn query_candidates(map: &SparseMap, query: &BowVector, n: usize) -> Vec<(u64, f64)> {
    if query.is_empty() {
        return Vec::new();
    }
    let idx = map.index();
    rank(idx.keyframe_ids.iter().copied(), idx.scores(query), n)
}

/// Reference ranking by scoring every keyframe directly.
pub fn query_candidates_exhaustive(map: &SparseMap, query: &BowVector, n: usize) -> Vec<(u64, f64)> {
    if query.is_empty() {
        return Vec::new();
    }
    let scores = map.keyframes.iter().map(|k| bow_similarity(query, &k.bow)).collect();
    rank(map.keyframes.iter().map(|k| k.id), scores, n)
}
