//! Named, seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derives an independent ChaCha20 stream for `label` from a master seed.
///
/// Two different labels never share state, so adding a consumer of randomness
/// in one module does not perturb the values drawn in another.
pub fn stream(seed: u64, label: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(digest)
}

/// Like [`stream`], with an additional index (e.g. a party number).
pub fn indexed_stream(seed: u64, label: &str, index: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(digest)
}
