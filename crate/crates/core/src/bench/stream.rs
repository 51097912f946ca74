//! Fixed-size minibatches of the unlabeled set.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STRIDE: usize = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinibatchPolicy {
    /// Draw a fresh batch each time.
    #[default]
    Resample,
    /// Swap one batch element for an outside example each time.
    Replace,
}

/// How a consumer streams the unlabeled set: a new batch every `stride`
/// optimizer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub batch_size: usize,
    pub stride: usize,
    pub policy: MinibatchPolicy,
    pub seed: u64,
}

impl StreamConfig {
    pub fn new(batch_size: usize, seed: u64) -> Self {
        Self {
            batch_size,
            stride: DEFAULT_STRIDE,
            policy: MinibatchPolicy::default(),
            seed,
        }
    }
}

/// Endless sequence of sorted index batches into an unlabeled set of size
/// `n`, sampled uniformly without replacement.
#[derive(Debug, Clone)]
pub struct MinibatchStream {
    n: usize,
    batch_size: usize,
    policy: MinibatchPolicy,
    rng: ChaCha8Rng,
    current: Vec<usize>,
}

pub fn minibatch_stream(n: usize, batch_size: usize, policy: MinibatchPolicy, seed: u64) -> Result<MinibatchStream> {
    if batch_size == 0 || batch_size > n {
        return Err(Error::invalid(format!(
            "batch size {batch_size} must be in 1..={n}"
        )));
    }
    Ok(MinibatchStream {
        n,
        batch_size,
        policy,
        rng: ChaCha8Rng::seed_from_u64(seed),
        current: Vec::new(),
    })
}

impl Iterator for MinibatchStream {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let fresh = self.current.is_empty() || self.policy == MinibatchPolicy::Resample;
        if fresh {
            self.current = sample(&mut self.rng, self.n, self.batch_size).into_vec();
        } else if self.batch_size < self.n {
            let slot = self.rng.gen_range(0..self.batch_size);
            let incoming = loop {
                let c = self.rng.gen_range(0..self.n);
                if !self.current.contains(&c) {
                    break c;
                }
            };
            self.current[slot] = incoming;
        }
        let mut batch = self.current.clone();
        batch.sort_unstable();
        Some(batch)
    }
}
