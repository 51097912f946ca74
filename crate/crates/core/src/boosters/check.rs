//! Equivalence between the oracle's weighted objective and the steepest
//! coordinate of the slack function, on a finite pool of stumps.

use crate::data::{FeatureMatrix, LabeledSet};
use crate::error::{check_len, Error, Result};
use crate::slack::sign;
use crate::trees::Stump;

use super::oracle::build_oracle_dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateCheck {
    /// Oracle objective of each pool member.
    pub objectives: Vec<f64>,
    /// Slack derivative along each pool member, with `b` replaced by its
    /// plug-in estimate `(1/m) Σ_L y h(x)`.
    pub derivatives: Vec<f64>,
    pub by_objective: usize,
    pub by_slack: usize,
}

impl CoordinateCheck {
    pub fn agrees(&self) -> bool {
        self.by_objective == self.by_slack
    }
}

fn first_best(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

/// Scores every pool member both ways; ties resolve to the lowest index.
pub fn coordinate_check(l: &LabeledSet, u: &FeatureMatrix, scores: &[f64], pool: &[Stump]) -> Result<CoordinateCheck> {
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    check_len("score count", u.n_rows(), scores.len())?;
    let data = build_oracle_dataset(l, u, scores)?;
    let objectives: Vec<f64> = pool
        .iter()
        .map(|s| data.objective(|x| f64::from(s.predict(x))))
        .collect();
    let m = l.len() as f64;
    let n = u.n_rows() as f64;
    let derivatives: Vec<f64> = pool
        .iter()
        .map(|s| {
            let plugin: f64 = l
                .features()
                .rows()
                .zip(l.labels())
                .map(|(x, &y)| f64::from(y) * f64::from(s.predict(x)))
                .sum::<f64>()
                / m;
            let well: f64 = u
                .rows()
                .zip(scores)
                .filter(|(_, s)| s.abs() >= 1.0)
                .map(|(x, &sc)| f64::from(s.predict(x)) * sign(sc))
                .sum::<f64>()
                / n;
            -plugin + well
        })
        .collect();
    Ok(CoordinateCheck {
        by_objective: first_best(&objectives, |a, b| a > b + 1e-12),
        by_slack: first_best(&derivatives, |a, b| a < b - 1e-12),
        objectives,
        derivatives,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn stump(threshold: f64, polarity: i8) -> Stump {
        Stump {
            feature: 0,
            threshold,
            polarity,
        }
    }

    fn setup() -> (LabeledSet, FeatureMatrix) {
        let l = LabeledSet::new(
            FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
            vec![1, 1, -1, -1],
        )
        .unwrap();
        let u = FeatureMatrix::from_rows(&[vec![0.5], vec![1.5], vec![2.5], vec![3.5]]).unwrap();
        (l, u)
    }

    #[test]
    fn hand_built_pool() {
        let (l, u) = setup();
        let pool = [stump(0.5, 1), stump(1.5, 1), stump(2.5, 1)];
        // example 1.5 is confidently positive: hallucinated -1 there
        let scores = [0.2, 1.3, -0.4, -2.0];
        let c = coordinate_check(&l, &u, &scores, &pool).unwrap();
        assert_abs_diff_eq!(c.objectives[0], 0.5 + (0.25 * 1.0 + 0.25 * -1.0));
        assert_abs_diff_eq!(c.objectives[1], 1.0 + (-0.25 + -0.25));
        assert_abs_diff_eq!(c.objectives[2], 0.5 + (-0.25 + -0.25));
        // tie between the first two goes to the lower index
        assert_eq!(c.by_objective, 0);
        assert!(c.agrees());
        for (o, d) in c.objectives.iter().zip(&c.derivatives) {
            assert_abs_diff_eq!(*o, -d, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_hedged_is_labeled_only() {
        let (l, u) = setup();
        let pool = [stump(0.5, 1), stump(1.5, 1), stump(2.5, -1)];
        let c = coordinate_check(&l, &u, &[0.0; 4], &pool).unwrap();
        assert_eq!(c.by_objective, 1);
        assert!(c.agrees());
    }

    #[test]
    fn duplicates_pick_lowest_index() {
        let (l, u) = setup();
        let pool = [stump(0.5, -1), stump(1.5, 1), stump(1.5, 1)];
        let c = coordinate_check(&l, &u, &[0.0; 4], &pool).unwrap();
        assert_eq!((c.by_objective, c.by_slack), (1, 1));
    }

    proptest! {
        #[test]
        fn objective_is_negated_derivative(
            scores in proptest::collection::vec(-3.0f64..3.0, 4),
            thresholds in proptest::collection::vec((-1.0f64..4.0, prop::bool::ANY), 1..6),
        ) {
            let (l, u) = setup();
            let pool: Vec<Stump> = thresholds.iter().map(|&(t, p)| stump(t, if p { 1 } else { -1 })).collect();
            let c = coordinate_check(&l, &u, &scores, &pool).unwrap();
            for (o, d) in c.objectives.iter().zip(&c.derivatives) {
                prop_assert!((o + d).abs() < 1e-12);
            }
            prop_assert!(c.agrees());
        }
    }
}
