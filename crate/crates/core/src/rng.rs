//! Seeded, splittable random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! 64-bit stream id derived from a path of indices (scenario, replication,
//! purpose, ...). Streams with different paths never overlap, so work items
//! can be evaluated in any order or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream-purpose tags used as the last path element.
pub mod purpose {
    pub const DESIGN: u64 = 1;
    pub const COEFFICIENT: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SNR: u64 = 4;
    pub const MOMENTS: u64 = 5;
    pub const REFERENCE: u64 = 6;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for `(seed, path)`.
pub fn substream(seed: u64, path: &[u64]) -> Stream {
    let id = path
        .iter()
        .fold(0x6A09_E667_F3BC_C908u64, |acc, &p| splitmix64(acc ^ splitmix64(p)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A 64-bit seed derived from `(seed, path)`, for nesting seeded configs.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    rand::RngCore::next_u64(&mut substream(seed, path))
}
