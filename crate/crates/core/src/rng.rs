//! Seed derivation. Every realization draws from its own stream, keyed by the
//! global seed and the realization index, so shards can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `global`.
pub fn stream_seed(global: u64, index: u64) -> u64 {
    splitmix64(splitmix64(global) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream(global: u64, index: u64) -> Rng {
    Rng::seed_from_u64(stream_seed(global, index))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
