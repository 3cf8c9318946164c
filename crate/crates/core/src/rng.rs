//! Seeded randomness shared by every stochastic step.
//!
//! All shuffles, down-sampling, initialisation and dropout masks draw from
//! xoshiro256++ seeded through SplitMix64 (`seed_from_u64`). The generator
//! and the `rand` 0.9 sampling routines are value-stable across platforms,
//! so a fixed seed reproduces the same partitions and models everywhere.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub const DEFAULT_SEED: u64 = 42;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Seed for the `index`-th independent unit of work derived from a base seed.
pub fn derive(seed: u64, index: u64) -> u64 {
    seed ^ index
}
