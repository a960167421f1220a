//! Stable seed derivation. Every seeded component derives its stream from a
//! base seed plus a label, so streams stay fixed when unrelated components
//! are added or reordered.

use rand::SeedableRng;
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(buf)
}

pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[label.as_bytes()]))
}

pub fn gaussian<R: rand::Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
