//! Deterministic, hierarchically splittable random number streams.
//!
//! Every particle, chain, level, and iteration draws from its own substream,
//! identified by a path of (label, index) pairs under a root seed. Streams are
//! derived by hashing the path, so results do not depend on execution order
//! and parallel workers never contend on shared generator state.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Identifies one substream: a root seed plus an ordered derivation path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamKey {
    root_seed: u64,
    path: Vec<(String, u64)>,
}

impl StreamKey {
    pub fn root(root_seed: u64) -> Self {
        StreamKey {
            root_seed,
            path: Vec::new(),
        }
    }

    /// Child key appending (label, index). Injective in (label, index).
    pub fn derive(&self, label: &str, index: u64) -> StreamKey {
        debug_assert!(!label.is_empty(), "stream label must be nonempty");
        let mut path = self.path.clone();
        path.push((label.to_string(), index));
        StreamKey {
            root_seed: self.root_seed,
            path,
        }
    }

    /// Counter-based generator keyed by the hash of the full path.
    pub fn stream(&self) -> RandStream {
        let mut hasher = Sha256::new();
        hasher.update(self.root_seed.to_le_bytes());
        for (label, index) in &self.path {
            // Length-prefix the label so ("ab",1) and ("a",b1...) cannot collide.
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
            hasher.update(index.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        RandStream {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }
}

/// A deterministic stream of random variates owned by one worker.
#[derive(Debug, Clone)]
pub struct RandStream {
    rng: ChaCha8Rng,
}

impl RandStream {
    /// `dim` i.i.d. draws from N(0, scale); `scale` is the variance.
    pub fn gaussian_vector(&mut self, dim: usize, scale: f64) -> Result<Vec<f64>> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::Domain(format!(
                "gaussian scale must be positive, got {scale}"
            )));
        }
        let normal = Normal::new(0.0, scale.sqrt()).expect("valid std dev");
        Ok((0..dim).map(|_| normal.sample(&mut self.rng)).collect())
    }

    /// One standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        Normal::new(0.0, 1.0).unwrap().sample(&mut self.rng)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
