//! Seed derivation: one 64-bit master seed, with independent per-replica
//! streams derived by a splittable counter scheme so replicas reproduce
//! identically regardless of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// RNG driving a single path simulation.
pub type PathRng = ChaCha12Rng;

/// RNG for one path, fully determined by its seed.
pub fn path_rng(seed: u64) -> PathRng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream seed from the master seed and a list of counters
/// (dimension index, replica index, purpose tag, ...).
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0x5851_f42d_4c95_7f2d);
    for &c in counters {
        state = splitmix64(state ^ splitmix64(c.wrapping_mul(0xda94_2042_e4dd_58b5)));
    }
    state
}
