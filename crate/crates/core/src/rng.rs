//! Counter-based derivation of independent random substreams.
//!
//! Every random draw in a sweep comes from a stream keyed by the master seed,
//! a purpose tag and a tuple of indices. Draws for one purpose never shift the
//! draws of another, and the result of a trial does not depend on the order in
//! which trials are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Geometry = 1,
    TrainingBase = 2,
    ChannelGains = 3,
    TrainingNoise = 4,
    SpreadingBase = 5,
    FeedbackNoise = 6,
    Dither = 7,
    TestChannel = 8,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for `(seed, stream, indices)`.
pub fn substream(seed: u64, stream: Stream, indices: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ splitmix64(stream as u64));
    for &i in indices {
        state = splitmix64(state ^ splitmix64(i.wrapping_add(0xA5A5_5A5A)));
    }
    let mut key = [0u8; 32];
    for (chunk, k) in key.chunks_exact_mut(8).zip(0u64..) {
        let word = splitmix64(state.wrapping_add(k));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
