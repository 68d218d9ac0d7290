//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] derived from a
//! user seed and a substream number, so results never depend on wall-clock
//! time, OS entropy, or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Substream numbers used by the pipeline. Each consumer owns one.
pub mod substream {
    pub const SPLIT: u64 = 1;
    pub const STRUCTURE: u64 = 2;
    pub const MODEL_SAMPLE: u64 = 3;
    pub const JITTER: u64 = 4;
    pub const BASELINE: u64 = 5;
    pub const ALLOCATE: u64 = 6;
    pub const PERMUTATION: u64 = 7;
    pub const BENCHMARK_SOURCE: u64 = 8;
    pub const BENCHMARK_TARGET: u64 = 9;
    pub const ORDERING_BASE: u64 = 1 << 32;
}

/// A stream for `seed`, positioned on `substream`.
pub fn stream(seed: u64, substream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(substream);
    rng
}

/// A fresh seed for a purpose-specific family of substreams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    stream(seed, tag).next_u64()
}
