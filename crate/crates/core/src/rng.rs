//! Seeded random streams. Every consumer of randomness takes an explicit
//! seed and a stream id so that components never share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream ids used across the crate.
pub(crate) const STREAM_WAVEFORM: u64 = 1;
pub(crate) const STREAM_CHANNEL: u64 = 2;
pub(crate) const STREAM_THERMAL: u64 = 3;
pub(crate) const STREAM_QUANTIZATION: u64 = 4;
pub(crate) const STREAM_SOI: u64 = 5;
