use serde::{Deserialize, Serialize};

use crate::boosters::{best_stump, Hypothesis, OracleDataset, RowSource, WeakLearner};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::trees::fit_tree;

/// Weight given to a member with zero weighted error, unless the members
/// before it need more to be outvoted.
pub const PERFECT_ALPHA_FLOOR: f64 = 6.907_755_278_982_137; // ½·ln(10⁶)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    /// Weighted training error of the round's hypothesis.
    pub epsilon: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub members: Vec<(Hypothesis, f64)>,
    pub rounds: Vec<Round>,
    /// Example weights after the last round.
    pub final_weights: Vec<f64>,
}

impl AdaBoostModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let need = self.members.iter().map(|(h, _)| h.n_features()).max().unwrap_or(0);
        if x.len() < need {
            return Err(Error::DimensionMismatch {
                what: "feature row",
                expected: need,
                got: x.len(),
            });
        }
        Ok(self.members.iter().map(|(h, a)| a * f64::from(h.predict(x))).sum())
    }

    /// `Π 2√(ε(1-ε))` over the rounds that added a member.
    pub fn training_error_bound(&self) -> f64 {
        self.rounds
            .iter()
            .filter(|r| r.alpha > 0.0)
            .map(|r| 2.0 * (r.epsilon * (1.0 - r.epsilon)).sqrt())
            .product()
    }

    pub fn training_error(&self, l: &LabeledSet) -> Result<f64> {
        let mut wrong = 0usize;
        for (x, &y) in l.features().rows().zip(l.labels()) {
            let s = self.score(x)?;
            let label = if s >= 0.0 { 1 } else { -1 };
            if label != y {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / l.len() as f64)
    }
}

/// Discrete AdaBoost for up to `rounds` rounds. Stops once a round's weighted
/// error reaches ½ (that round is dropped) or hits 0 (that member is kept
/// with a dominating weight).
pub fn adaboost(l: &LabeledSet, rounds: usize, learner: &WeakLearner) -> Result<AdaBoostModel> {
    if l.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    if rounds == 0 {
        return Err(Error::invalid("AdaBoost needs at least one round"));
    }
    let m = l.len();
    let mut data = OracleDataset {
        x: l.features().clone(),
        y: l.labels().to_vec(),
        w: vec![1.0 / m as f64; m],
        source: vec![RowSource::Labeled; m],
    };
    let mut model = AdaBoostModel {
        members: Vec::new(),
        rounds: Vec::new(),
        final_weights: Vec::new(),
    };
    for _ in 0..rounds {
        let h = match learner {
            WeakLearner::Stump => Hypothesis::Stump(best_stump(&data)?.0),
            WeakLearner::Tree(p) => Hypothesis::Tree(fit_tree(&data.x, &data.y, &data.w, p)?),
        };
        let preds: Vec<f64> = data.x.rows().map(|x| f64::from(h.predict(x))).collect();
        let epsilon: f64 = (0..m)
            .filter(|&i| preds[i] != f64::from(data.y[i]))
            .map(|i| data.w[i])
            .sum::<f64>()
            .clamp(0.0, 1.0);
        if epsilon >= 0.5 {
            model.rounds.push(Round { epsilon, alpha: 0.0 });
            break;
        }
        if epsilon == 0.0 {
            let previous: f64 = model.members.iter().map(|(_, a)| a).sum();
            let alpha = PERFECT_ALPHA_FLOOR.max(1.0 + previous);
            model.rounds.push(Round { epsilon, alpha });
            model.members.push((h, alpha));
            break;
        }
        let alpha = 0.5 * ((1.0 - epsilon) / epsilon).ln();
        for i in 0..m {
            data.w[i] *= (-alpha * f64::from(data.y[i]) * preds[i]).exp();
        }
        let total: f64 = data.w.iter().sum();
        data.w.iter_mut().for_each(|w| *w /= total);
        model.rounds.push(Round { epsilon, alpha });
        model.members.push((h, alpha));
    }
    model.final_weights = data.w;
    Ok(model)
}
