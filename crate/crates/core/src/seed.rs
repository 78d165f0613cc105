//! Seed derivation.
//!
//! Every random stream in an experiment is derived from one root seed with a
//! counter scheme: the root and each element of a path (a domain tag followed
//! by run, location, trial or sample indices) are folded through SplitMix64.
//! Two different paths give statistically independent streams, and a path
//! always yields the same seed regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags for the first path element.
pub mod domain {
    pub const COLLECT: u64 = 0x10;
    pub const REFERENCE: u64 = 0x11;
    pub const CROSS_VALIDATION: u64 = 0x20;
    pub const ACTIVE: u64 = 0x30;
    pub const PASSIVE: u64 = 0x31;
    pub const FRAME: u64 = 0x40;
    pub const JITTER: u64 = 0x41;
    pub const PIXEL: u64 = 0x42;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed at `path` below `root`.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for (depth, &index) in path.iter().enumerate() {
        let salted = index
            .wrapping_mul(GOLDEN_GAMMA)
            .wrapping_add(depth as u64 + 1);
        state = splitmix64(state ^ splitmix64(salted));
    }
    state
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
