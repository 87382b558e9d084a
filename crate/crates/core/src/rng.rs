//! Seed derivation for independent random sub-streams.
//!
//! Every random unit (a permutation, a sampled graph, one edge's query
//! stream) draws from its own ChaCha8 stream whose seed is a mix of the
//! master seed and a short tag path. Work split across threads therefore
//! reproduces the sequential result bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod tag {
    pub const PERMUTATION: u64 = 0x7065_726d;
    pub const PAIR_GRAPH: u64 = 0x7061_6972;
    pub const PAIR_EDGE: u64 = 0x6564_6765;
    pub const HYPER_SAMPLE: u64 = 0x6879_7072;
    pub const HYPER_EDGE: u64 = 0x6865_6467;
    pub const DRIVER: u64 = 0x6472_7672;
    pub const VERIFY: u64 = 0x7672_6679;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a tag path into a master seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(master: u64, tags: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
