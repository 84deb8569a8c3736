use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MapError;
use crate::features::Descriptor;

pub const MAX_KMEANS_ITERS: usize = 50;
pub const KMEANS_TOL: f64 = 1e-6;

/// Flat visual vocabulary: unit-norm centroids plus per-word idf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub k: usize,
    pub centroids: Vec<Descriptor>,
    pub idf: Vec<f64>,
}

/// Sparse word → weight vector, iterated in word order.
pub type BowVector = BTreeMap<u32, f64>;

fn nearest(centroids: &[Descriptor], d: &Descriptor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let s = c.distance_squared(d);
        if s < best.1 {
            best = (i, s);
        }
    }
    best
}

fn kmeans_pp_seed(data: &[&Descriptor], k: usize, rng: &mut ChaCha8Rng) -> Vec<Descriptor> {
    let mut centers = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|d| d.distance_squared(&centers[0])).collect();
    while centers.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centre
            Err(_) => rng.random_range(0..data.len()),
        };
        let c = data[next].clone();
        for (i, d) in data.iter().enumerate() {
            d2[i] = d2[i].min(d.distance_squared(&c));
        }
        centers.push(c);
    }
    centers
}

/// [`build_vocabulary`] on at most `max_training` descriptors (taken with a
/// fixed stride across all frames); `k` is clamped to the training size.
pub fn train_vocabulary(
    frames: &[Vec<Descriptor>],
    k: usize,
    max_training: usize,
    seed: u64,
) -> Result<Vocabulary, MapError> {
    let total: usize = frames.iter().map(Vec::len).sum();
    let stride = total.div_ceil(max_training.max(1)).max(1);
    let mut seen = 0usize;
    let training: Vec<Vec<Descriptor>> = frames
        .iter()
        .map(|f| {
            let kept = f
                .iter()
                .enumerate()
                .filter(|(i, _)| (seen + i) % stride == 0)
                .map(|(_, d)| d.clone())
                .collect();
            seen += f.len();
            kept
        })
        .collect();
    let n_train: usize = training.iter().map(Vec::len).sum();
    let vk = k.min(n_train);
    if vk < k {
        log::info!("vocabulary size reduced to {vk} (training set of {n_train})");
    }
    build_vocabulary(&training, vk.max(2), seed)
}

/// Spherical k-means (L2 assignment, normalized-mean update) with k-means++
/// seeding. `frames` groups the training descriptors by frame; document
/// frequencies for the idf are counted per frame.
pub fn build_vocabulary(
    frames: &[Vec<Descriptor>],
    k: usize,
    seed: u64,
) -> Result<Vocabulary, MapError> {
    let data: Vec<&Descriptor> = frames.iter().flatten().collect();
    if k < 2 {
        return Err(MapError::InvalidConfig("vocabulary needs k >= 2".into()));
    }
    if data.len() < k {
        return Err(MapError::InsufficientTrainingData { needed: k, got: data.len() });
    }
    let dim = data[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_seed(&data, k, &mut rng);

    for _ in 0..MAX_KMEANS_ITERS {
        let assign: Vec<(usize, f64)> = data.par_iter().map(|d| nearest(&centroids, d)).collect();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        let mut first = vec![0usize; k];
        for (i, (d, (c, _))) in data.iter().zip(&assign).enumerate() {
            if counts[*c] == 0 {
                first[*c] = i;
            }
            counts[*c] += 1;
            sums[*c].iter_mut().zip(&d.0).for_each(|(s, v)| *s += v);
        }
        let mut moved: f64 = 0.0;
        let mut taken = vec![false; data.len()];
        for c in 0..k {
            let next = if counts[c] == 0 {
                // re-seed an empty cluster at the worst-served point
                let far = (0..data.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| assign[a].1.total_cmp(&assign[b].1).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                data[far].clone()
            } else if counts[c] == 1 {
                data[first[c]].clone()
            } else {
                Descriptor::from_raw(std::mem::take(&mut sums[c]))
            };
            moved = moved.max(next.distance(&centroids[c]));
            centroids[c] = next;
        }
        if moved < KMEANS_TOL {
            break;
        }
    }

    let n = frames.len() as f64;
    let mut df = vec![0usize; k];
    for f in frames {
        let mut seen = vec![false; k];
        for d in f {
            seen[nearest(&centroids, d).0] = true;
        }
        seen.iter().enumerate().filter(|(_, s)| **s).for_each(|(w, _)| df[w] += 1);
    }
    let idf = df.iter().map(|&c| (1.0 + n / (1.0 + c as f64)).ln()).collect();
    Ok(Vocabulary { k, centroids, idf })
}

impl Vocabulary {
    pub fn quantize(&self, d: &Descriptor) -> u32 {
        nearest(&self.centroids, d).0 as u32
    }

    /// Total squared distance of each descriptor to its word centroid.
    pub fn quantization_error(&self, descriptors: &[Descriptor]) -> f64 {
        descriptors.iter().map(|d| nearest(&self.centroids, d).1).sum()
    }
}

/// tf·idf weights, L2-normalized; empty input gives an empty vector.
pub fn bow_vector(descriptors: &[Descriptor], vocab: &Vocabulary) -> BowVector {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let words: Vec<u32> = descriptors.par_iter().map(|d| vocab.quantize(d)).collect();
    for w in words {
        *counts.entry(w).or_default() += 1;
    }
    let total = descriptors.len() as f64;
    let mut v: BowVector = counts
        .into_iter()
        .map(|(w, c)| (w, c as f64 / total * vocab.idf[w as usize]))
        .filter(|(_, x)| *x > 0.0)
        .collect();
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Dot product of two sparse vectors, accumulated in word order.
pub fn bow_similarity(a: &BowVector, b: &BowVector) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut s = 0.0;
    for (w, x) in small {
        if let Some(y) = large.get(w) {
            s += x * y;
        }
    }
    s
}
