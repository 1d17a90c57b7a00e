//! Seed derivation for independent random streams.
//!
//! Every consumer of randomness (network initialisation, environment resets,
//! exploration noise, replay sampling, evaluation) owns its own ChaCha stream
//! keyed by `(seed, domain, a, b)`. Streams never share state, so skipping the
//! draws of one consumer leaves all other consumers untouched.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Stream domains.
pub mod domain {
    pub const INIT_ACTOR: u64 = 1;
    pub const INIT_ADVERSARY: u64 = 2;
    pub const INIT_CRITIC: u64 = 3;
    pub const ENV: u64 = 4;
    pub const EXPLORATION: u64 = 5;
    pub const MIXING: u64 = 6;
    pub const REPLAY: u64 = 7;
    pub const TRAIN_EVAL: u64 = 8;
    pub const SWEEP: u64 = 9;
}

/// Builds the stream keyed by `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: u64, a: u64, b: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    StreamRng::from_seed(key)
}
