//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha20 (`rand_chacha::ChaCha20Rng`).
//! A stream is identified by a `(seed, stream)` pair: the 64-bit seed is expanded
//! into the 256-bit ChaCha key with `SeedableRng::seed_from_u64`, and the stream
//! number selects the ChaCha stream. Child seeds are derived with the SplitMix64
//! finalizer, so a run is reproducible from its root seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Algorithm identity recorded in artifacts.
pub const RNG_ALGORITHM: &str = "chacha20/seed_from_u64/splitmix64-derive";

/// Purpose-specific stream numbers.
pub mod streams {
    pub const PAYOFFS: u64 = 1;
    pub const DISC_LATENTS: u64 = 2;
    pub const MASK: u64 = 3;
    pub const PARAM_INIT: u64 = 4;
    pub const ISOMORPHISM: u64 = 5;
    pub const BASELINE: u64 = 6;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer applied to `seed + index * golden`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
