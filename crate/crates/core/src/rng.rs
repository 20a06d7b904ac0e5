//! Seed derivation. Every random stream in the crate is a ChaCha8 stream
//! keyed by a `(seed, stream)` pair so that sample `i` never depends on how
//! many samples precede it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids for independent consumers of one user seed.
pub mod streams {
    pub const LAYOUT: u64 = 1;
    pub const SHIFT: u64 = 2;
    pub const INIT_G: u64 = 10;
    pub const INIT_C1: u64 = 11;
    pub const INIT_C2: u64 = 12;
    pub const INIT_D: u64 = 13;
    pub const SHUFFLE_S: u64 = 20;
    pub const SHUFFLE_T: u64 = 21;
    pub const NEURAL_DIV: u64 = 30;
    pub const WORLD: u64 = 40;
    pub const RENDER: u64 = 41;
}

/// A generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A generator for item `index` of stream `stream` under `seed`.
pub fn item(seed: u64, stream: u64, index: u64) -> Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(index);
    rng
}
