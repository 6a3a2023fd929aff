//! Counter-based seed derivation.
//!
//! Every random stream is keyed by `(master, run, purpose)`, so a run draws
//! the same numbers regardless of scheduling or of how many other runs
//! exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes of random streams within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Instance = 1,
    Init = 2,
    Training = 3,
    Evaluation = 4,
    Plan = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `(run, purpose)` under `master`.
pub fn derive(master: u64, run: u64, purpose: Purpose) -> u64 {
    derive_raw(master, run, purpose as u64)
}

/// Same as [`derive`] with a free-form counter, e.g. a training step.
pub fn derive_raw(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
