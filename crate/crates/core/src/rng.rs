//! Seeded random streams.
//!
//! Every sample draws from its own ChaCha stream selected by index, so the
//! value of sample `k` does not depend on how many samples are requested.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent 64-bit seed for sub-task `index` of a run.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed ^ 0x9e37_79b9_7f4a_7c15, index).next_u64()
}
