//! Seed plumbing. Every random draw in the crate comes from a ChaCha8
//! stream whose seed is derived from a user seed plus a tag path, so that
//! independent consumers never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// One SplitMix64 step.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a sequence of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}

pub fn rng_from(seed: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, tags))
}

// Tags naming the consumers of derived streams.
pub(crate) const TAG_INIT: u64 = 1;
pub(crate) const TAG_SHUFFLE: u64 = 2;
pub(crate) const TAG_PARTITION: u64 = 3;
pub(crate) const TAG_ARRIVAL: u64 = 4;
pub(crate) const TAG_PROBE: u64 = 5;
pub(crate) const TAG_TRAIN: u64 = 6;
pub(crate) const TAG_RANDOM_POLICY: u64 = 7;
pub(crate) const TAG_SYNTH: u64 = 8;
pub(crate) const TAG_CYCLE: u64 = 9;
