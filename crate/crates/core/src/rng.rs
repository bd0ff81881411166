//! Seed derivation for independent deterministic streams.
//!
//! Every random decision in a run (weight init, batch shuffling, per-guest
//! noise, train/test split) draws from its own ChaCha stream whose seed is
//! derived from the run seed, a purpose tag, and an index. Streams never
//! alias unless tag and index both collide.

use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from `base` for the given purpose.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Seeded generator for the derived stream.
pub fn stream(base: u64, tag: &str, index: u64) -> ChaCha20Rng {
    use rand::SeedableRng;
    ChaCha20Rng::seed_from_u64(derive_seed(base, tag, index))
}
