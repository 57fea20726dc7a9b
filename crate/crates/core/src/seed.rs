//! Seed derivation. Every random stream in the crate comes from a
//! `ChaCha8Rng` seeded through [`derive`], so sub-streams are independent
//! of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of labels.
pub fn derive(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(parent), |acc, &l| mix(acc ^ mix(l)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream labels.
pub const GRAPH: u64 = 1;
pub const GATEWAY: u64 = 2;
pub const TRANSFORM: u64 = 3;
pub const MESSAGES: u64 = 4;
pub const COEFFICIENTS: u64 = 5;
pub const SELECTION: u64 = 6;
pub const TRIAL: u64 = 7;
