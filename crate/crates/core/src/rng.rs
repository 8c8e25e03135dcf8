//! Seeded randomness. Every random stream in the crate is a `ChaCha8Rng` built from
//! a 64-bit seed, and sub-seeds are derived with a bijective mixer so that distinct
//! inputs never share a stream.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream tag. For a fixed parent the
/// map `tag -> seed` is injective.
#[inline]
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(mix64(parent) ^ tag)
}

/// Uniformly random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    idx
}
