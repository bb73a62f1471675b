//! Seed derivation for reproducible, parallel-safe random substreams.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value obtained by folding a list of tags (repetition, method, level,
//! particle, ...) into a master seed with the SplitMix64 finalizer:
//!
//! ```text
//! h_0 = master
//! h_{k+1} = splitmix64(h_k ^ splitmix64(tag_k + 0x9E3779B97F4A7C15 * (k + 1)))
//! ```
//!
//! Substreams therefore depend only on their tag path, never on scheduling
//! order, which keeps results independent of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags that keep the different consumers of a seed apart.
pub mod tags {
    pub const METHOD_MC: u64 = 1;
    pub const METHOD_SMC: u64 = 2;
    pub const METHOD_IS: u64 = 3;
    pub const METHOD_STDDEV: u64 = 4;
    pub const QUANTILES: u64 = 5;

    pub const INIT: u64 = 11;
    pub const MUTATE: u64 = 12;
    pub const RESAMPLE: u64 = 13;
    pub const MOVE: u64 = 14;

    /// Sequential copula draws shared by the two baselines.
    pub const DRAWS: u64 = 21;
    pub const MIXING: u64 = 22;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().enumerate().fold(master, |h, (k, &tag)| {
        let salted = splitmix64(tag.wrapping_add(GOLDEN.wrapping_mul(k as u64 + 1)));
        splitmix64(h ^ salted)
    })
}

pub fn substream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
