//! Seed derivation.
//!
//! Every random stream in a run is derived from one root seed plus a path of
//! integer labels, so parallel evaluation order cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels used when deriving per-episode seeds.
pub mod role {
    pub const ENGINE: u64 = 0x656e_6769;
    pub const DEFENDER: u64 = 0x6465_6665;
    pub const ATTACKER: u64 = 0x6174_7461;
    pub const OPPONENT_STREAM: u64 = 0x6f70_706f;
    pub const INIT: u64 = 0x696e_6974;
    pub const EVAL: u64 = 0x6576_616c;
    pub const TRAIN: u64 = 0x7472_6169;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of labels into a new 64-bit seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Stable 64-bit FNV-1a hash, used to turn identifiers into seed labels.
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
