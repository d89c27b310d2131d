//! Reproducible random streams.
//!
//! Every independent unit of work (a chain replica, a noise realization, a
//! batch of matrix samples) draws from its own ChaCha8 stream, selected by
//! `(master seed, stream index)`. ChaCha is counter-based and specified
//! bit-for-bit, so results do not depend on platform or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64, set_stream)";

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
