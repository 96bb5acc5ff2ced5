//! Counter-based random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from the run
//! seed plus a tuple of counters (iteration, episode, purpose, ...), so results
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Purpose tags, kept distinct so streams never collide across uses.
pub mod tag {
    pub const NOISE: u64 = 1;
    pub const POLICY_INIT: u64 = 2;
    pub const EPISODE: u64 = 3;
    pub const MINIBATCH: u64 = 4;
    pub const PHASE: u64 = 6;
}

/// Mixes counters into a seed; used to give sub-runs their own seed.
pub fn derive_seed(seed: u64, counters: &[u64]) -> u64 {
    let mut key = splitmix64(seed);
    for &c in counters {
        key = splitmix64(key ^ splitmix64(c.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    key
}

/// Deterministic stream for `(seed, counters...)`.
pub fn stream(seed: u64, counters: &[u64]) -> ChaCha8Rng {
    let key = derive_seed(seed, counters);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}
