//! Seed derivation for reproducible, platform-stable random streams.
//!
//! Every randomized component draws from its own labeled stream so that
//! adding or removing draws in one place never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Independent RNG stream for a `(seed, label)` pair.
pub fn stream(seed: u64, label: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}
