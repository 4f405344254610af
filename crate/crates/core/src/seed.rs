//! Deterministic per-trial random streams.
//!
//! Every trial's randomness is a SHA-256 of the master seed, the scenario name,
//! a key naming the sweep point, and the trial index. Named sub-streams are
//! hashed once more from that, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn field(h: &mut Sha256, bytes: &[u8]) {
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed([u8; 32]);

impl TrialSeed {
    pub fn derive(master: u64, scenario: &str, point: &str, trial: usize) -> Self {
        let mut h = Sha256::new();
        field(&mut h, &master.to_le_bytes());
        field(&mut h, scenario.as_bytes());
        field(&mut h, point.as_bytes());
        field(&mut h, &(trial as u64).to_le_bytes());
        Self(h.finalize().into())
    }

    /// Independent generator for one named purpose within the trial.
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        field(&mut h, &self.0);
        field(&mut h, label.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }
}
