//! Seed-derived random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream, addressed by a
//! purpose and an index, so that e.g. changing the grid size of a g-estimate
//! leaves the sampling chain's stream untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant occupies the top 32 bits of the
/// ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Chain = 1,
    GridPoint = 2,
    Tuning = 3,
    Replicate = 4,
}

pub fn stream(seed: u64, purpose: Purpose, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}
