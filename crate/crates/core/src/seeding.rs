//! Stable hashing and RNG derivation.
//!
//! Every random stream in the crate is derived from explicit seeds through
//! these helpers, so results never depend on thread scheduling, global RNG
//! state or the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer; decorrelates nearby integer seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a list of words into one seed.
pub fn combine(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed_5eed_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

/// A ChaCha stream keyed by a domain tag and a list of integers.
pub fn rng_for(tag: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut words = Vec::with_capacity(parts.len() + 1);
    words.push(fnv1a(tag.as_bytes()));
    words.extend_from_slice(parts);
    ChaCha8Rng::seed_from_u64(combine(&words))
}

/// Uniform value in `[0, 1)` derived from a hash, without an RNG object.
pub fn unit_from(parts: &[u64]) -> f64 {
    (combine(parts) >> 11) as f64 / (1u64 << 53) as f64
}
