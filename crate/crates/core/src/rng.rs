//! Deterministic RNG streams derived from one user seed.
//!
//! Every randomized step (a batch's negatives, a partition's initial
//! values, an ordering's tie breaks) gets its own stream keyed by a path of
//! integers, so results do not depend on which thread drew first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with each element of `path` into a single 64-bit key.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, path))
}
