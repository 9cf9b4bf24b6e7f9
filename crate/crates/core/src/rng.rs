//! Seeded random streams.
//!
//! Every sampling loop in this crate owns one [`ChaCha8Rng`] stream. Parallel
//! or repeated work derives independent substreams from the same seed instead
//! of sharing a stream, so results do not depend on scheduling or call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root stream for a run.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` derived from `seed`.
///
/// Substreams with different ids never overlap, so one logical sampling
/// sequence (a run, a grid cell) can be given its own stream and reproduced
/// in isolation.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
