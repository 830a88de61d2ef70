//! Seeded, stream-split random number generation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent reproducible generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for frame `frame` of sweep point `point`.
pub fn point_stream(point: usize, frame: usize) -> u64 {
    ((point as u64) << 32) | frame as u64
}
