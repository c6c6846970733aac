//! Deterministic seed derivation.
//!
//! Everything random in an experiment is driven by a ChaCha stream whose seed
//! is a mix of a run-level base seed and a few integers (trial index, model
//! epoch, particle index) or the bit pattern of a parameter vector. The mixing
//! is a fixed SplitMix64 fold so results do not depend on the std hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two seeds into one; not symmetric.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Hash of the exact bit pattern of a real vector.
pub fn hash_reals(values: &[f64]) -> u64 {
    values
        .iter()
        .fold(0x51_7C_C1_B7_27_22_0A_95, |acc, v| mix(acc, v.to_bits()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
