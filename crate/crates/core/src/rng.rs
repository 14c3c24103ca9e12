//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! `u64`. Child seeds are derived from a parent seed and a path of indices
//! with a SplitMix64 finalizer, so a trial's stream depends only on its own
//! coordinates and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a path of indices.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(parent.wrapping_add(GOLDEN)), |acc, &i| {
        mix(acc ^ mix(i.wrapping_add(GOLDEN).wrapping_mul(GOLDEN)))
    })
}

/// The generator used throughout the crate.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
