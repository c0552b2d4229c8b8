//! Seed splitting: every random stream derives from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a seed for stream `(domain, index)` under `root`.
pub fn derive_seed(root: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ domain) ^ index)
}

pub fn stream_rng(root: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, domain, index))
}

/// Stream domains used by the training and evaluation harness.
pub mod domain {
    pub const INIT: u64 = 1;
    pub const ROLLOUT: u64 = 2;
    pub const UPDATE: u64 = 3;
    pub const EVAL: u64 = 4;
}
