//! Shared batch plans: every participant iterates identical index lists.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Splits `[0, n)` into consecutive batches, optionally after a seeded
/// shuffle. Identical arguments give identical plans, which is what keeps
/// the participants sample-aligned.
pub fn batch_iter(
    n: usize,
    batch_size: usize,
    seed: u64,
    shuffle: bool,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    if shuffle {
        indices.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    }
    Ok(indices.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
