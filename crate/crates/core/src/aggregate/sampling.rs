use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::AggregateError;

/// Uniform `n`-subset of `cp_ids` without replacement.
///
/// Ids are sorted before a partial Fisher-Yates shuffle, so the result depends only on the
/// set of ids and the seed, not on input order.
pub fn sample_fleet(cp_ids: &[String], n: usize, seed: u64) -> Result<Vec<String>, AggregateError> {
    if n > cp_ids.len() {
        return Err(AggregateError::SampleTooLarge {
            requested: n,
            population: cp_ids.len(),
        });
    }
    let mut ids: Vec<&String> = cp_ids.iter().collect();
    ids.sort_unstable();
    Ok(sample_indices(ids.len(), n, seed)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect())
}

/// Partial shuffle of `0..population`, returning the first `n` drawn positions.
pub(crate) fn sample_indices(population: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..population).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, n);
    chosen.to_vec()
}

/// Stable child seed for one (level, repeat) unit of a study.
pub fn derive_child_seed(seed: u64, level: usize, repeat: usize) -> u64 {
    mix_seed(&[seed, level as u64, repeat as u64])
}

/// First eight bytes of the SHA-256 of the little-endian parts.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}
