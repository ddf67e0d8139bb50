//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a single master seed. Per-trial
//! and per-seat streams are derived by hashing the master seed together with
//! structural labels, so results never depend on execution order or worker
//! count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output permutation.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over a byte string; used to turn pairing labels into ids.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Mixes a master seed with any number of structural components.
///
/// Each component is absorbed through a splitmix64 round, so `mix(m, &[a, b])`
/// and `mix(m, &[b, a])` produce unrelated streams.
pub fn mix(master: u64, components: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &c in components {
        state = splitmix64(state ^ c);
    }
    state
}

/// Seed for the `trial`-th run of the pairing labelled `label`.
pub fn trial_seed(master: u64, label: &str, trial: u64) -> u64 {
    mix(master, &[fnv1a64(label.as_bytes()), trial])
}

/// Deterministic generator for a derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
