//! Deterministic random streams.
//!
//! Every parallel unit of work (a bootstrap resample, a simulated agent, a CV
//! seed) draws from its own ChaCha stream keyed by `(seed, stream)`, so results
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// RNG for substream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-level substream, e.g. `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: u64, index: u64) -> StreamRng {
    stream(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15), index)
}

/// Stable 64-bit FNV-1a hash, used to derive stream ids from string keys.
pub fn stable_hash(key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
