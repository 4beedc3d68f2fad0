//! Seeded generators and deterministic seed derivation.
//!
//! Every stochastic routine takes an explicit generator. Child seeds are
//! derived from a root seed and a textual key through SHA-256, so a derived
//! stream depends only on *what* it is for, never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Derives a child seed from `root` and a list of key parts.
///
/// Parts are length-prefixed before hashing, so `["ab", "c"]` and
/// `["a", "bc"]` produce different seeds.
pub fn derive_seed(root: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_key_sensitive() {
        let a = derive_seed(7, &["root", "UNRATE", "0.6"]);
        assert_eq!(a, derive_seed(7, &["root", "UNRATE", "0.6"]));
        assert_ne!(a, derive_seed(8, &["root", "UNRATE", "0.6"]));
        assert_ne!(a, derive_seed(7, &["root", "UNRATE", "0.4"]));
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut r1 = rng_from_seed(11);
        let mut r2 = rng_from_seed(11);
        let a: Vec<u64> = (0..8).map(|_| r1.random()).collect();
        let b: Vec<u64> = (0..8).map(|_| r2.random()).collect();
        assert_eq!(a, b);
    }
}
