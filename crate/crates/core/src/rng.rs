//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(seed, purpose, index)`, so results do not depend on scheduling order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Patient = 1,
    Stay = 2,
    Split = 10,
    Folds = 11,
    Search = 12,
    Bootstrap = 20,
    SplitFeatures = 21,
    RowSubsample = 22,
    Model = 23,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// Derives a child seed; used to hand independent seeds to sub-tasks.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, index).next_u64()
}
