//! Seeded random streams.
//!
//! All stochastic routines draw from ChaCha8 (the 8-round ChaCha stream
//! cipher used as a counter-based generator). A 64-bit seed is written
//! little-endian into the first eight bytes of the 256-bit key, the
//! remaining key bytes are zero, and the 64-bit ChaCha stream id selects an
//! independent sub-stream. `split(seed, i)` is therefore reproducible by any
//! ChaCha8 implementation: key = le64(seed) || 0^24, stream = i, counter = 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream 0 of `seed`.
pub fn rng_from_seed(seed: u64) -> SimRng {
    split(seed, 0)
}

/// Independent stream `stream` of `seed`, used for replicas and sub-tasks.
pub fn split(seed: u64, stream: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Well-known stream ids so independent consumers of one seed never overlap.
pub mod streams {
    pub const GRAPH: u64 = 0;
    pub const PLACEMENT: u64 = 1;
    pub const SIMULATION: u64 = 2;
    /// Replica `i` of an ensemble uses `REPLICA_BASE + i`.
    pub const REPLICA_BASE: u64 = 1 << 32;
}
