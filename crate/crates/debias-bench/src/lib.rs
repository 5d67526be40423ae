//! Shared fixtures for the criterion benchmarks.

use debias_core::corpus::{train_test_split, Dataset, SplitSpec};
use debias_core::synth::{generate, SynthSpec};

/// Deterministic synthetic corpus sized for benchmarking.
pub fn bench_corpus(n_reviews: usize) -> Dataset {
    let spec = SynthSpec {
        n_users: (n_reviews / 40).max(2),
        n_products: (n_reviews / 20).max(2),
        n_reviews,
        seed: 1234,
        ..SynthSpec::default()
    };
    generate(&spec).expect("valid spec").0
}

pub fn bench_split(n_reviews: usize) -> (Dataset, Dataset) {
    let data = bench_corpus(n_reviews);
    train_test_split(&data, &SplitSpec::new(4, 5, 7).unwrap()).unwrap()
}

/// Tokenized documents of the corpus.
pub fn bench_docs(data: &Dataset) -> Vec<Vec<String>> {
    data.records
        .iter()
        .map(|r| debias_core::features::tokenize(&r.summary, &r.body))
        .collect()
}
