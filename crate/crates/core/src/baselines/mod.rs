//! Supervised comparison methods.

mod adaboost;
mod logistic;

pub use adaboost::{adaboost, AdaBoostModel, Round, PERFECT_ALPHA_FLOOR};
pub use logistic::{logistic_fit, logistic_gradient, logistic_loss, LinearModel, LogisticFit};

use crate::error::{Error, Result};
use crate::trees::{tree_predict, Forest};

/// Mean vote of the forest's trees, in `[-1, 1]`.
pub fn forest_score(forest: &Forest, x: &[f64]) -> Result<f64> {
    if forest.is_empty() {
        return Err(Error::Empty("forest"));
    }
    let mut total = 0.0;
    for t in &forest.trees {
        total += f64::from(tree_predict(t, x)?);
    }
    Ok(total / forest.len() as f64)
}
