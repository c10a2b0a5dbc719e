//! Seed derivation and generator construction.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Per-trial seeds are derived from `(base, trial, tag)` with
//! the SplitMix64 finalizer, so a trial's data never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the data, initialization and auxiliary streams of one trial apart.
pub mod tag {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const INIT_SECOND: u64 = 3;
    pub const AUX: u64 = 4;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for `trial` of an experiment started from `base`.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(base) ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Derive an independent sub-stream seed from a trial seed.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
