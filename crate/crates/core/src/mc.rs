//! Seeded random streams and reproducible parallel batches.
//!
//! Every batch is split into a fixed number of streams; stream `k` of seed
//! `s` always sees the same ChaCha sequence, and results are reduced in
//! stream order, so output depends only on the seed.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::increments::LatticePoint;

/// Number of independent streams a batch is split into.
pub const STREAMS: u64 = 64;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sizes of each stream's share of `total` draws.
fn shares(total: u64) -> Vec<(u64, u64)> {
    (0..STREAMS)
        .map(|k| (k, total / STREAMS + u64::from(k < total % STREAMS)))
        .collect()
}

/// Runs `draw` `total` times across seeded streams and tallies the points.
pub fn parallel_counts<F>(total: u64, seed: u64, draw: F) -> BTreeMap<LatticePoint, u64>
where
    F: Fn(&mut ChaCha8Rng) -> LatticePoint + Sync,
{
    let partial: Vec<BTreeMap<LatticePoint, u64>> = shares(total)
        .into_par_iter()
        .map(|(k, m)| {
            let mut rng = stream_rng(seed, k);
            let mut counts = BTreeMap::new();
            for _ in 0..m {
                *counts.entry(draw(&mut rng)).or_insert(0) += 1;
            }
            counts
        })
        .collect();
    let mut merged = BTreeMap::new();
    for counts in partial {
        for (p, c) in counts {
            *merged.entry(p).or_insert(0) += c;
        }
    }
    merged
}

/// Runs `draw` `total` times across seeded streams and returns all values in
/// stream order.
pub fn parallel_values<T, F>(total: u64, seed: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let partial: Vec<Vec<T>> = shares(total)
        .into_par_iter()
        .map(|(k, m)| {
            let mut rng = stream_rng(seed, k);
            (0..m).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    partial.into_iter().flatten().collect()
}
