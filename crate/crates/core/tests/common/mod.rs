#![allow(dead_code)]

use crslab_core::Instance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shuffled(m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(rng);
    p
}

/// Random simple graph on at most `n` vertices with `m` edges and values
/// scaled so every fractional degree is at most `cap`.
pub fn random_instance(n: usize, m: usize, cap: f64, rng: &mut ChaCha8Rng) -> Instance {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    pairs.truncate(m);
    let mut deg = vec![0usize; n];
    for &(a, b) in &pairs {
        deg[a] += 1;
        deg[b] += 1;
    }
    let edges: Vec<(usize, usize, f64)> = pairs
        .iter()
        .map(|&(a, b)| (a, b, cap * rng.gen_range(0.1..1.0) / deg[a].max(deg[b]) as f64))
        .collect();
    Instance::new(format!("random_{n}_{m}"), n, &edges)
}
