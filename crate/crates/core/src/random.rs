//! Deterministic random substreams.
//!
//! Every random quantity in a run is drawn from a [`RandomStream`] identified
//! by the master seed plus a *lineage*: an ordered path of `(label, index)`
//! pairs such as `[("user_prop", 17)]`. Because each user and item owns its
//! substreams, output does not depend on evaluation order or thread count.
//!
//! Derivation (format v1):
//!
//! ```text
//! key = SHA-256( "latsim/stream/v1"
//!              || seed as u64 little-endian
//!              || for each (label, index) in lineage:
//!                     len(label) as u32 LE || label bytes (UTF-8) || index as u64 LE )
//! generator = ChaCha8Rng::from_seed(key)      // rand_chacha 0.9.0
//! ```
//!
//! Draws use `rand` 0.9.5 and `rand_distr` 0.5.1; both are pinned exactly in
//! the workspace manifest because changing either changes every output.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

const DOMAIN_TAG: &[u8] = b"latsim/stream/v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RandomError {
    #[error("standard deviation must be finite and non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("cannot draw {count} distinct indices from a population of {population}")]
    SubsetTooLarge { population: usize, count: usize },
}

/// A single-owner deterministic generator bound to a lineage.
#[derive(Debug, Clone)]
pub struct RandomStream {
    lineage: Vec<(String, u64)>,
    rng: ChaCha8Rng,
}

/// Derives the substream for `(seed, lineage)`.
pub fn derive_stream(seed: u64, lineage: &[(&str, u64)]) -> RandomStream {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN_TAG);
    hasher.update(seed.to_le_bytes());
    for (label, index) in lineage {
        hasher.update((label.len() as u32).to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.update(index.to_le_bytes());
    }
    let key: [u8; 32] = hasher.finalize().into();
    RandomStream {
        lineage: lineage.iter().map(|(l, i)| (l.to_string(), *i)).collect(),
        rng: ChaCha8Rng::from_seed(key),
    }
}

impl RandomStream {
    pub fn lineage(&self) -> &[(String, u64)] {
        &self.lineage
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Draws from `Normal(mu, sigma)`. A zero `sigma` returns `mu` exactly,
    /// though a draw is still consumed so stream positions do not depend on
    /// the parameters.
    pub fn normal(&mut self, mu: f64, sigma: f64) -> Result<f64, RandomError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(RandomError::NegativeSigma(sigma));
        }
        let z: f64 = self.rng.sample(StandardNormal);
        Ok(if sigma == 0.0 { mu } else { mu + sigma * z })
    }

    /// Returns `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> Result<bool, RandomError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(RandomError::InvalidProbability(p));
        }
        Ok(self.uniform() < p)
    }

    /// Uniform `count`-subset of `0..population`, ascending.
    ///
    /// Floyd's algorithm: every subset is equiprobable and exactly `count`
    /// integer draws are consumed.
    pub fn uniform_subset(
        &mut self,
        population: usize,
        count: usize,
    ) -> Result<Vec<usize>, RandomError> {
        if count > population {
            return Err(RandomError::SubsetTooLarge { population, count });
        }
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        for j in (population - count)..population {
            let t = self.rng.random_range(0..=j);
            let pick = if chosen.contains(&t) { j } else { t };
            chosen.insert(pick);
            out.push(pick);
        }
        out.sort_unstable();
        Ok(out)
    }
}
