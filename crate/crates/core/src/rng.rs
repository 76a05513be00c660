//! Deterministic random-number plumbing.
//!
//! All stochastic code runs on ChaCha12 (`rand_chacha` 0.3, pinned), seeded
//! through [`rng_from_seed`]. Parameter sweeps derive one independent stream
//! per (point, replicate) task with [`replicate_seed`], so results do not
//! depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 step; the standard 64-bit finalizer-based mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of one task's RNG stream from the master seed.
///
/// The mapping is a fixed SplitMix64 chain over (seed, point, replicate);
/// distinct task indices give unrelated streams and the values are stable
/// across platforms and releases.
pub fn replicate_seed(master: u64, point_index: u64, replicate_index: u64) -> u64 {
    let mut state = master;
    let a = splitmix64(&mut state);
    state ^= point_index.wrapping_mul(0xA076_1D64_78BD_642F);
    let b = splitmix64(&mut state);
    state ^= replicate_index.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    let c = splitmix64(&mut state);
    a ^ b.rotate_left(24) ^ c.rotate_left(48)
}

/// The simulation RNG: ChaCha12 seeded via rand's SplitMix64 expansion.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
