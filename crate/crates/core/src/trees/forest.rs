use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{fit_tree, DecisionTree, TreeParams};
use crate::data::LabeledSet;
use crate::error::{Error, Result};

/// Bagged trees; each tree is trained on a bootstrap resample drawn from its
/// own seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub seeds: Vec<u64>,
}

impl Forest {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

/// `m` indices drawn uniformly with replacement from `0..m`.
pub fn bootstrap_indices(m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| rng.gen_range(0..m)).collect()
}

pub fn fit_forest(labeled: &LabeledSet, p: usize, seed: u64, params: &TreeParams) -> Result<Forest> {
    if p == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if labeled.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..p).map(|_| master.next_u64()).collect();
    let m = labeled.len();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut counts = vec![0.0; m];
            for i in bootstrap_indices(m, s) {
                counts[i] += 1.0;
            }
            fit_tree(labeled.features(), labeled.labels(), &counts, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees, seeds })
}
