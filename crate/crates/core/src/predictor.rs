use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{check_len, Result};
use crate::slack::{clip, CorrelationVector, WeightVector};
use crate::trees::Ensemble;

/// Weighted ensemble with the clipped aggregate `g(x) = clip(⟨x, σ⟩)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub ensemble: Ensemble,
    pub sigma: WeightVector,
    pub b: CorrelationVector,
}

impl Predictor {
    pub fn new(ensemble: Ensemble, sigma: WeightVector, b: CorrelationVector) -> Result<Self> {
        check_len("weight vector", ensemble.len(), sigma.len())?;
        check_len("correlation vector", ensemble.len(), b.len())?;
        Ok(Self { ensemble, sigma, b })
    }

    /// Predicts 0 everywhere.
    pub fn abstaining() -> Self {
        Self::default()
    }

    pub fn is_abstaining(&self) -> bool {
        self.sigma.as_slice().iter().all(|&w| w == 0.0)
    }

    /// Raw score `⟨x, σ⟩`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.ensemble.score(self.sigma.as_slice(), x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(clip(self.score(x)?))
    }

    /// Raw scores of every row.
    pub fn scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if self.ensemble.is_empty() || x.is_empty() {
            return Ok(vec![0.0; x.n_rows()]);
        }
        self.ensemble
            .prediction_rows(&self.ensemble.members, x)?
            .scores(self.sigma.as_slice())
    }

    /// Number of members with positive weight.
    pub fn support(&self) -> usize {
        self.sigma.as_slice().iter().filter(|&&w| w > 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{EnsembleMember, Stump};

    #[test]
    fn abstaining_scores_zero() {
        let p = Predictor::abstaining();
        assert!(p.is_abstaining());
        assert_eq!(p.predict(&[3.0]).unwrap(), 0.0);
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(p.scores(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn clipped_aggregate() {
        let mut e = Ensemble::new();
        e.push(EnsembleMember::Stump(Stump {
            feature: 0,
            threshold: 0.5,
            polarity: 1,
        }));
        let p = Predictor::new(
            e,
            WeightVector::new(vec![2.0]).unwrap(),
            CorrelationVector::new(vec![0.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(p.score(&[0.0]).unwrap(), 2.0);
        assert_eq!(p.predict(&[0.0]).unwrap(), 1.0);
        assert_eq!(p.predict(&[1.0]).unwrap(), -1.0);
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(p.scores(&x).unwrap(), vec![2.0, -2.0]);
    }
}
