//! Weak-learner oracle over labeled plus hallucinated data.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Label, LabeledSet};
use crate::error::{check_len, Error, Result};
use crate::slack::hallucinate;
use crate::trees::{fit_tree, DecisionTree, Stump, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    Labeled,
    Hallucinated,
}

/// Weighted rows handed to the weak learner: all of `L` at weight `1/m`
/// with true labels, and every clipped unlabeled example at weight `1/n`
/// with its hallucinated label.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDataset {
    pub x: FeatureMatrix,
    pub y: Vec<Label>,
    pub w: Vec<f64>,
    pub source: Vec<RowSource>,
}

impl OracleDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn weight_of(&self, source: RowSource) -> f64 {
        self.w
            .iter()
            .zip(&self.source)
            .filter(|(_, &s)| s == source)
            .map(|(w, _)| w)
            .sum()
    }

    /// `Σ wᵢ yᵢ h(xᵢ)` for predictions `h` aligned with the rows.
    pub fn objective(&self, h: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len())
            .map(|i| self.w[i] * f64::from(self.y[i]) * h(self.x.row(i)))
            .sum()
    }
}

pub fn build_oracle_dataset(l: &LabeledSet, u: &FeatureMatrix, scores: &[f64]) -> Result<OracleDataset> {
    if l.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    if u.is_empty() {
        return Err(Error::Empty("unlabeled set"));
    }
    check_len("score count", u.n_rows(), scores.len())?;
    let width = l.n_features().max(u.n_cols());
    let mut x = l.features().widen(width);
    let mut y = l.labels().to_vec();
    let wl = 1.0 / l.len() as f64;
    let mut w = vec![wl; l.len()];
    let mut source = vec![RowSource::Labeled; l.len()];
    let wu = 1.0 / u.n_rows() as f64;
    let mut padded = vec![0.0; width];
    for (j, &s) in scores.iter().enumerate() {
        let label = hallucinate(s).value();
        if label != 0 {
            padded[..u.n_cols()].copy_from_slice(u.row(j));
            x.push_row(&padded)?;
            y.push(label);
            w.push(wu);
            source.push(RowSource::Hallucinated);
        }
    }
    Ok(OracleDataset { x, y, w, source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeakLearner {
    Stump,
    Tree(TreeParams),
}

impl Default for WeakLearner {
    fn default() -> Self {
        WeakLearner::Tree(TreeParams::default())
    }
}

/// Hypothesis returned by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Hypothesis {
    Stump(Stump),
    Tree(DecisionTree),
}

impl Hypothesis {
    /// Predicts on `x`; the row must be as wide as the hypothesis needs.
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            Hypothesis::Stump(s) => s.predict(x),
            Hypothesis::Tree(t) => t.predict_unchecked(x),
        }
    }

    /// Smallest row width `predict` accepts.
    pub fn n_features(&self) -> usize {
        match self {
            Hypothesis::Stump(s) => s.feature + 1,
            Hypothesis::Tree(t) => t.n_features(),
        }
    }
}

/// Exact best stump: maximizes `Σ wᵢ yᵢ h(xᵢ)` over every feature, every
/// midpoint threshold and both polarities. Ties go to the lowest feature,
/// then the lowest threshold, then polarity `+1`. The constant stump is a
/// candidate too but only wins when strictly better.
pub fn best_stump(data: &OracleDataset) -> Result<(Stump, f64)> {
    if data.is_empty() {
        return Err(Error::Empty("oracle dataset"));
    }
    let total: f64 = (0..data.len()).map(|i| data.w[i] * f64::from(data.y[i])).sum();
    let mut best: Option<(Stump, f64)> = None;
    let consider = |stump: Stump, value: f64, best: &mut Option<(Stump, f64)>| {
        if best.map_or(true, |(_, v)| value > v + 1e-12) {
            *best = Some((stump, value));
        }
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for feature in 0..data.x.n_cols() {
        order.sort_by(|&a, &b| data.x.row(a)[feature].total_cmp(&data.x.row(b)[feature]));
        let mut left = 0.0;
        for k in 0..order.len() - 1 {
            let i = order[k];
            left += data.w[i] * f64::from(data.y[i]);
            let lo = data.x.row(i)[feature];
            let hi = data.x.row(order[k + 1])[feature];
            if lo >= hi {
                continue;
            }
            let mut threshold = 0.5 * (lo + hi);
            if threshold >= hi {
                threshold = lo;
            }
            // polarity +1 predicts +1 on the left
            let value = 2.0 * left - total;
            for (polarity, v) in [(1, value), (-1, -value)] {
                consider(
                    Stump {
                        feature,
                        threshold,
                        polarity,
                    },
                    v,
                    &mut best,
                );
            }
        }
    }
    let polarity = if total >= 0.0 { 1 } else { -1 };
    consider(
        Stump {
            feature: 0,
            threshold: f64::MAX,
            polarity,
        },
        total.abs(),
        &mut best,
    );
    Ok(best.expect("constant stump is always considered"))
}

/// Calls the weak learner on the oracle data.
pub fn oracle_best(data: &OracleDataset, learner: &WeakLearner) -> Result<Hypothesis> {
    match learner {
        WeakLearner::Stump => Ok(Hypothesis::Stump(best_stump(data)?.0)),
        WeakLearner::Tree(params) => Ok(Hypothesis::Tree(fit_tree(&data.x, &data.y, &data.w, params)?)),
    }
}
