//! Counter-based random streams.
//!
//! Every replicate draws from its own ChaCha stream selected by
//! `(seed, index)`, so results do not depend on how replicates are spread
//! over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Independent stream for replicate `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Default seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 20_240_917;
