//! Derivation of independent RNG streams from one master seed.
//!
//! Every parallel unit of work (cluster, replicate, evaluation stage) gets
//! its own ChaCha stream keyed by hashing the master seed together with a
//! label path, so outputs are identical regardless of worker count or
//! scheduling.

use rand_chacha::ChaCha20Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Hashes `(master, labels...)` into a 32-byte ChaCha seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for &l in labels {
        hasher.update(l.to_le_bytes());
    }
    hasher.finalize().into()
}

/// ChaCha stream for the given label path.
pub fn derive_rng(master: u64, labels: &[u64]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(master, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = derive_rng(7, &[1, 2]);
        let mut b = derive_rng(7, &[1, 2]);
        let mut c = derive_rng(7, &[2, 1]);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        let xc: u64 = c.random();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }
}
