#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssom::grid::{bin_posts, GridField};
use ssom::ingest::{generate_synthetic, SyntheticSpec};
use ssom::partition::Partition;
use ssom::Label;

pub const FIXTURE_PROPORTIONS: [f64; 4] = [0.02, 0.10, 0.30, 0.50];

/// 60×60 cells in four 30×30 quadrants, 200 posts per cell, seed 42.
pub fn planted_fixture() -> (GridField, Partition) {
    let spec = SyntheticSpec::blocks(60, 60, 2, 2, &FIXTURE_PROPORTIONS, 200, 42).unwrap();
    let (posts, truth) = generate_synthetic(&spec).unwrap();
    let field = bin_posts(&posts, spec.precision, None).unwrap();
    (field, truth)
}

/// Two 30×15 halves at 0.05 and 0.45.
pub fn two_region_fixture() -> (GridField, Partition) {
    let spec = SyntheticSpec::blocks(30, 30, 1, 2, &[0.05, 0.45], 200, 7).unwrap();
    let (posts, truth) = generate_synthetic(&spec).unwrap();
    let field = bin_posts(&posts, spec.precision, None).unwrap();
    (field, truth)
}

const FILLER: [&str; 12] = [
    "the", "train", "was", "late", "again", "today", "coffee", "park", "walk", "rain", "friends",
    "music",
];

/// `n` documents, half positive. Positives carry "zork", negatives "blee";
/// the rest is shared filler.
pub fn separable_corpus(n: usize, seed: u64) -> Vec<(String, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let mut words: Vec<&str> = (0..rng.gen_range(3..8))
                .map(|_| FILLER[rng.gen_range(0..FILLER.len())])
                .collect();
            let at = rng.gen_range(0..=words.len());
            words.insert(at, if positive { "zork" } else { "blee" });
            let label = if positive {
                Label::Positive
            } else {
                Label::Negative
            };
            (words.join(" "), label)
        })
        .collect()
}
