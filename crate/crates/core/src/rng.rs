//! Seeded random streams. Every chain owns one `ChainRng`; ChaCha8 keeps
//! streams reproducible across platforms and releases of `rand`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for chain `index` of a multi-chain run started from `base`.
pub fn chain_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}
