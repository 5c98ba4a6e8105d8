//! Seed derivation.
//!
//! Every stage draws from its own generator derived from one user seed, so
//! that changing one stage's parameters never perturbs another stage's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Mixes a stream tag into a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream tags for the CLI's fan-out of a single `--seed`.
pub mod stream {
    pub const CODEBOOK: u64 = 1;
    pub const INIT: u64 = 2;
    pub const BINARIZER: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const STRATEGY: u64 = 5;
}
