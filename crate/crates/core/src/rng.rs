//! Seeded random streams.
//!
//! Every stochastic operation takes its randomness from an explicit
//! [`Stream`] built from a 64-bit seed. Independent sub-streams are derived
//! by mixing the parent seed with a path of indices, so parallel workers
//! never share state and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed as `seed ^ hash(path)`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let h = path
        .iter()
        .fold(0x243f_6a88_85a3_08d3_u64, |acc, &p| mix(acc ^ mix(p)));
    seed ^ h
}

pub fn derive(seed: u64, path: &[u64]) -> Stream {
    stream(derive_seed(seed, path))
}
