use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Descriptor;

pub const DEFAULT_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub query_index: usize,
    pub train_index: usize,
    pub distance: f64,
    /// Best distance over second-best distance.
    pub ratio: f64,
}

/// Exhaustive two-nearest-neighbour search with Lowe's ratio test.
///
/// A match is emitted iff `d1 / d2 < ratio` (ties rejected). Among equally
/// distant trains the lower index is the nearest. Fewer than two trains
/// yields no matches.
pub fn knn_ratio_match(queries: &[Descriptor], trains: &[Descriptor], ratio: f64) -> Vec<Match> {
    if trains.len() < 2 {
        return Vec::new();
    }
    queries
        .par_iter()
        .enumerate()
        .filter_map(|(qi, q)| {
            let (mut b1, mut b2) = ((usize::MAX, f64::INFINITY), f64::INFINITY);
            for (ti, t) in trains.iter().enumerate() {
                let d = q.distance_squared(t);
                if d < b1.1 {
                    b2 = b1.1;
                    b1 = (ti, d);
                } else if d < b2 {
                    b2 = d;
                }
            }
            let (d1, d2) = (b1.1.sqrt(), b2.sqrt());
            // 0/0 (two exact duplicates) is maximally ambiguous
            let r = if d2 > 0.0 { d1 / d2 } else { 1.0 };
            (r < ratio).then_some(Match {
                query_index: qi,
                train_index: b1.0,
                distance: d1,
                ratio: r,
            })
        })
        .collect()
}
