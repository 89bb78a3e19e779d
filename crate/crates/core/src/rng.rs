//! Keyed ChaCha streams.
//!
//! Every random quantity is drawn from a stream addressed by
//! `(seed, domain, path, stream)`, so results do not depend on how paths are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates independent uses of the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Path = 1,
    Detector = 2,
    Reflected = 3,
    Survival = 4,
}

pub fn stream(seed: u64, domain: Domain, path: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&path.to_le_bytes());
    key[24..].copy_from_slice(b"qdetect\0");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
