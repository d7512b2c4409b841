//! Seeded random streams.
//!
//! Every stochastic component draws from [`ChaCha8Rng`], a counter-based
//! stream cipher generator. A stream is fully determined by its `u64` seed
//! (expanded with `SeedableRng::seed_from_u64`), so replicate `r` of a run
//! with base seed `s` is reproduced by re-seeding with the same derived seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable 64-bit digest of a string key (first eight bytes of SHA-256).
pub fn stable_hash(key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Derive an independent sub-stream seed from a base seed and a label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    base.wrapping_add(stable_hash(label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(seeded(7), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(seeded(7), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn stable_hash_is_fixed() {
        // pinned so that replicate seeds never drift between releases
        assert_eq!(stable_hash(""), 0x141c_fc98_42c4_b0e3);
        assert_ne!(stable_hash("a"), stable_hash("b"));
    }
}
