//! Seed derivation and counter-based coin flips.
//!
//! Every random decision in the crate is a pure function of a 64-bit seed and
//! a small tuple of counters, so results do not depend on evaluation order or
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream tag.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN).wrapping_add(mix64(tag.wrapping_mul(GOLDEN) ^ 0xD1B5_4A32_D192_ED03)))
}

/// Derive along a path of tags.
pub fn derive_path(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |s, &t| derive(s, t))
}

/// Uniform in [0, 1) from 53 high bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli(p) outcome for counter `index` under `seed`.
#[inline]
pub fn coin(seed: u64, index: u64, p: f64) -> bool {
    unit_f64(derive(seed, index)) < p
}

pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags; fixed so that seeds stay stable across releases.
pub mod tag {
    pub const REALIZATION: u64 = 0x5245_414c;
    pub const TRIAL: u64 = 0x5452_4941;
    pub const PLAN: u64 = 0x504c_414e;
    pub const POLICY: u64 = 0x504f_4c49;
    pub const PROPOSAL: u64 = 0x5052_4f50;
    pub const DOWNSAMPLE: u64 = 0x444f_574e;
    pub const CONDITIONAL: u64 = 0x434f_4e44;
    pub const GENERATOR: u64 = 0x4745_4e45;
    pub const FRESH: u64 = 0x4652_4553;
}
