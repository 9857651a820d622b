//! Deterministic random streams. Every stream is seeded from SHA-256 of the
//! master seed and a list of labels, so results do not depend on the order
//! in which parallel workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use sha2::{Digest, Sha256};

pub fn stream_seed(master: u64, labels: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    h.finalize().into()
}

pub fn stream_rng(master: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(master, labels))
}

/// Poisson draw; non-positive or non-finite means give 0.
pub fn poisson<R: rand::Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) || !mean.is_finite() {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    let x: f64 = dist.sample(rng);
    x as u64
}
