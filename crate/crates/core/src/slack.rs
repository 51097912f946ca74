//! Foundational math of muffled aggregation.
//!
//! An ensemble of `p` members makes predictions in `[-1, 1]` on `n`
//! unlabeled examples (0 means a specialist is asleep). Given nonnegative
//! member weights `σ` and per-member correlation lower bounds `b`, the slack
//! function is
//!
//! ```text
//! γ(σ) = -⟨b, σ⟩ + (1/n) Σ_j Ψ(⟨x_j, σ⟩),    Ψ(x) = max(1, |x|)
//! ```
//!
//! Half its minimum over `σ ≥ 0` is the minimax worst-case error on the
//! unlabeled set, attained by predicting `clip(⟨x_j, σ*⟩)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[inline]
pub fn clip(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// The potential well `Ψ(x) = max(1, |x|)`.
#[inline]
pub fn potential(x: f64) -> f64 {
    x.abs().max(1.0)
}

/// `sgn` with `sgn(0) = 0`.
#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// An aggregate score `⟨x, σ⟩`; its absolute value is the margin.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Score(pub f64);

impl Score {
    pub fn margin(self) -> f64 {
        self.0.abs()
    }

    pub fn hallucinate(self) -> HallucinatedLabel {
        hallucinate(self.0)
    }

    pub fn predict(self) -> f64 {
        clip(self.0)
    }
}

/// Label handed to the weak-learner oracle for an unlabeled example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HallucinatedLabel {
    Negative,
    Hedged,
    Positive,
}

impl HallucinatedLabel {
    pub fn value(self) -> i8 {
        match self {
            HallucinatedLabel::Negative => -1,
            HallucinatedLabel::Hedged => 0,
            HallucinatedLabel::Positive => 1,
        }
    }
}

/// `ỹ = -sgn(s) · 1{|s| ≥ 1}`: clipped examples get the opposite label,
/// hedged ones are left out of the oracle call.
pub fn hallucinate(s: f64) -> HallucinatedLabel {
    if s.abs() < 1.0 {
        HallucinatedLabel::Hedged
    } else if s > 0.0 {
        HallucinatedLabel::Negative
    } else {
        HallucinatedLabel::Positive
    }
}

/// Hard label from an aggregate score; a zero score resolves to `+1`.
pub fn hard_label(score: f64) -> i8 {
    if score < 0.0 {
        -1
    } else {
        1
    }
}

/// Nonnegative member weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!(
                "weights must be finite and nonnegative, got {w}"
            )));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Clamps negatives to zero; used by projected steps.
    pub(crate) fn from_projected(mut weights: Vec<f64>) -> Self {
        for w in &mut weights {
            if *w < 0.0 || w.is_nan() {
                *w = 0.0;
            }
        }
        Self(weights)
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Per-member lower bounds on the correlation `(1/n) Σ_j h_i(x_j) z_j`.
///
/// Components live in `[-1, 1]`; `-1` is the "no evidence" sentinel produced
/// by estimation and always pruned.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CorrelationVector(Vec<f64>);

impl CorrelationVector {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        if let Some(b) = bounds.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return Err(Error::invalid(format!(
                "correlation bounds must lie in [-1, 1], got {b}"
            )));
        }
        Ok(Self(bounds))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for CorrelationVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CorrelationVector> for Vec<f64> {
    fn from(b: CorrelationVector) -> Self {
        b.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SparseRow {
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Members × examples matrix of predictions, stored sparsely by row since
/// specialists are asleep (0) on most examples.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    n_cols: usize,
    rows: Vec<SparseRow>,
}

impl PredictionMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            rows: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>], n_cols: usize) -> Result<Self> {
        let mut f = Self::new(n_cols);
        for row in rows {
            f.push_dense_row(row)?;
        }
        Ok(f)
    }

    pub fn push_dense_row(&mut self, row: &[f64]) -> Result<()> {
        check_len("prediction row length", self.n_cols, row.len())?;
        let mut sparse = SparseRow::default();
        for (j, &v) in row.iter().enumerate() {
            check_entry(v)?;
            if v != 0.0 {
                sparse.cols.push(j as u32);
                sparse.vals.push(v);
            }
        }
        self.rows.push(sparse);
        Ok(())
    }

    /// Appends a row given as `(column, value)` pairs with strictly increasing
    /// columns.
    pub fn push_sparse_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let mut sparse = SparseRow::default();
        for (j, v) in entries {
            if j >= self.n_cols {
                return Err(Error::DimensionMismatch {
                    what: "prediction column index",
                    expected: self.n_cols,
                    got: j,
                });
            }
            if sparse.cols.last().is_some_and(|&last| last as usize >= j) {
                return Err(Error::invalid("sparse row columns must increase"));
            }
            check_entry(v)?;
            if v != 0.0 {
                sparse.cols.push(j as u32);
                sparse.vals.push(v);
            }
        }
        self.rows.push(sparse);
        Ok(())
    }

    #[inline]
    pub fn n_members(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.cols.len()).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        match row.cols.binary_search(&(j as u32)) {
            Ok(k) => row.vals[k],
            Err(_) => 0.0,
        }
    }

    /// Nonzero `(column, value)` entries of member `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = &self.rows[i];
        row.cols.iter().map(|&j| j as usize).zip(row.vals.iter().copied())
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (j, v) in self.row(i) {
            out[j] = v;
        }
        out
    }

    /// All member predictions on example `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_members()).map(|i| self.get(i, j)).collect()
    }

    /// Number of examples on which member `i` is awake.
    pub fn awake_count(&self, i: usize) -> usize {
        self.rows[i].cols.len()
    }

    /// Scores `F^T σ` for every example.
    pub fn scores(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        check_len("weight vector", self.n_members(), sigma.len())?;
        Ok(self.scores_unchecked(sigma))
    }

    pub(crate) fn scores_unchecked(&self, sigma: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (row, &w) in self.rows.iter().zip(sigma) {
            if w == 0.0 {
                continue;
            }
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                out[j as usize] += w * v;
            }
        }
        out
    }

    /// `Σ_j F_ij v_j` for member `i`.
    #[inline]
    pub(crate) fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let row = &self.rows[i];
        row.cols
            .iter()
            .zip(&row.vals)
            .map(|(&j, &x)| x * v[j as usize])
            .sum()
    }

    /// `scores[j] += w · F_ij` over member `i`'s nonzeros.
    pub(crate) fn axpy_row(&self, i: usize, w: f64, scores: &mut [f64]) {
        let row = &self.rows[i];
        for (&j, &v) in row.cols.iter().zip(&row.vals) {
            scores[j as usize] += w * v;
        }
    }

    /// Rows already known to be sorted, in range and within `[-1, 1]`.
    pub(crate) fn from_sorted_rows(n_cols: usize, rows: Vec<(Vec<u32>, Vec<f64>)>) -> Self {
        Self {
            n_cols,
            rows: rows
                .into_iter()
                .map(|(cols, vals)| SparseRow { cols, vals })
                .collect(),
        }
    }

    pub(crate) fn append(&mut self, other: PredictionMatrix) {
        debug_assert_eq!(self.n_cols, other.n_cols);
        self.rows.extend(other.rows);
    }

    /// Keeps only the listed members, in the given order.
    pub fn select_members(&self, keep: &[usize]) -> Self {
        Self {
            n_cols: self.n_cols,
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

fn check_entry(v: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("prediction {v} outside [-1, 1]")))
    }
}

/// The score of one example: `⟨column, σ⟩`.
pub fn score(sigma: &WeightVector, column: &[f64]) -> Result<Score> {
    check_len("prediction column", sigma.len(), column.len())?;
    Ok(Score(
        sigma
            .as_slice()
            .iter()
            .zip(column)
            .map(|(w, h)| w * h)
            .sum(),
    ))
}

/// Minimax prediction `clip(⟨column, σ⟩)`.
pub fn predict(sigma: &WeightVector, column: &[f64]) -> Result<f64> {
    Ok(score(sigma, column)?.predict())
}

fn check_dims(sigma: &[f64], b: &[f64], f: &PredictionMatrix) -> Result<()> {
    check_len("correlation vector", f.n_members(), b.len())?;
    check_len("weight vector", f.n_members(), sigma.len())?;
    if f.n_cols() == 0 {
        return Err(Error::Empty("unlabeled set"));
    }
    Ok(())
}

pub(crate) fn slack_from_scores(sigma: &[f64], b: &[f64], scores: &[f64]) -> f64 {
    let linear: f64 = b.iter().zip(sigma).map(|(b, s)| b * s).sum();
    let well: f64 = scores.iter().map(|&s| potential(s)).sum::<f64>() / scores.len() as f64;
    well - linear
}

/// The slack function `γ(σ)`.
pub fn slack(sigma: &WeightVector, b: &CorrelationVector, f: &PredictionMatrix) -> Result<f64> {
    check_dims(sigma.as_slice(), b.as_slice(), f)?;
    let scores = f.scores_unchecked(sigma.as_slice());
    Ok(slack_from_scores(sigma.as_slice(), b.as_slice(), &scores))
}

pub(crate) fn subgradient_from_scores(b: &[f64], f: &PredictionMatrix, scores: &[f64]) -> Vec<f64> {
    let n = scores.len() as f64;
    let active: Vec<f64> = scores
        .iter()
        .map(|&s| if s.abs() >= 1.0 { sign(s) } else { 0.0 })
        .collect();
    b.iter()
        .enumerate()
        .map(|(i, &bi)| -bi + f.row_dot(i, &active) / n)
        .collect()
}

/// A subgradient of `γ` at `σ`:
/// `-b_i + (1/n) Σ_j F_ij · sgn(s_j) · 1{|s_j| ≥ 1}`.
///
/// At the kinks `|s_j| = 1` the boundary is included, matching the
/// hallucination indicator.
pub fn slack_subgradient(
    sigma: &WeightVector,
    b: &CorrelationVector,
    f: &PredictionMatrix,
) -> Result<Vec<f64>> {
    check_dims(sigma.as_slice(), b.as_slice(), f)?;
    let scores = f.scores_unchecked(sigma.as_slice());
    Ok(subgradient_from_scores(b.as_slice(), f, &scores))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn one_member() -> (CorrelationVector, PredictionMatrix) {
        (
            CorrelationVector::new(vec![0.5]).unwrap(),
            PredictionMatrix::from_dense(&[vec![1.0, -1.0]], 2).unwrap(),
        )
    }

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn clip_and_potential() {
        assert_eq!(clip(1.7), 1.0);
        assert_eq!(clip(-3.0), -1.0);
        assert_eq!(clip(0.3), 0.3);
        assert_eq!(potential(0.0), 1.0);
        assert_eq!(potential(2.5), 2.5);
        assert_eq!(potential(-1.0), 1.0);
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&w(&[0.5, 0.25]), &[1.0, -1.0]).unwrap().0, 0.25);
        assert_eq!(score(&WeightVector::zeros(2), &[1.0, -1.0]).unwrap().0, 0.0);
        assert_eq!(score(&w(&[1.0, 1.0]), &[1.0, 0.0]).unwrap().0, 1.0);
        assert!(score(&w(&[1.0]), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn slack_examples() {
        let (b, f) = one_member();
        assert_abs_diff_eq!(slack(&w(&[1.0]), &b, &f).unwrap(), 0.5);
        assert_abs_diff_eq!(slack(&WeightVector::zeros(1), &b, &f).unwrap(), 1.0);
        assert_abs_diff_eq!(slack(&w(&[2.0]), &b, &f).unwrap(), 1.0);
        let empty = PredictionMatrix::new(0);
        assert!(matches!(
            slack(&WeightVector::zeros(0), &CorrelationVector::default(), &empty),
            Err(Error::Empty(_))
        ));
        assert!(slack(&w(&[1.0, 1.0]), &b, &f).is_err());
    }

    #[test]
    fn subgradient_examples() {
        let (b, f) = one_member();
        assert_eq!(slack_subgradient(&w(&[2.0]), &b, &f).unwrap(), vec![0.5]);
        assert_eq!(slack_subgradient(&w(&[0.5]), &b, &f).unwrap(), vec![-0.5]);
        let b2 = CorrelationVector::new(vec![0.3, -0.2]).unwrap();
        let f2 = PredictionMatrix::from_dense(&[vec![1.0, 1.0], vec![-1.0, 1.0]], 2).unwrap();
        assert_eq!(
            slack_subgradient(&WeightVector::zeros(2), &b2, &f2).unwrap(),
            vec![-0.3, 0.2]
        );
    }

    #[test]
    fn hallucinate_examples() {
        assert_eq!(hallucinate(0.5), HallucinatedLabel::Hedged);
        assert_eq!(hallucinate(1.5), HallucinatedLabel::Negative);
        assert_eq!(hallucinate(-2.0), HallucinatedLabel::Positive);
        assert_eq!(hallucinate(1.0), HallucinatedLabel::Negative);
        assert_eq!(hallucinate(-1.0), HallucinatedLabel::Positive);
        assert_eq!(hallucinate(0.0), HallucinatedLabel::Hedged);
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&w(&[2.0]), &[1.0]).unwrap(), 1.0);
        assert_eq!(predict(&w(&[0.3]), &[1.0]).unwrap(), 0.3);
        assert_eq!(predict(&WeightVector::zeros(1), &[1.0]).unwrap(), 0.0);
        assert_eq!(hard_label(0.0), 1);
        assert_eq!(hard_label(-0.1), -1);
    }

    #[test]
    fn sparse_matrix_roundtrip() {
        let dense = vec![vec![1.0, 0.0, -1.0], vec![0.0, 0.5, 0.0]];
        let f = PredictionMatrix::from_dense(&dense, 3).unwrap();
        assert_eq!(f.nnz(), 3);
        assert_eq!(f.dense_row(0), dense[0]);
        assert_eq!(f.column(1), vec![0.0, 0.5]);
        assert_eq!(f.awake_count(1), 1);
        assert!(PredictionMatrix::from_dense(&[vec![1.5, 0.0, 0.0]], 3).is_err());
        let mut g = PredictionMatrix::new(3);
        assert!(g.push_sparse_row([(2, 1.0), (1, 1.0)]).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, usize)> {
        (1usize..4, 1usize..7).prop_flat_map(|(p, n)| {
            (
                prop::collection::vec(-1.0..1.0f64, p),
                prop::collection::vec(
                    prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 1.0, 0.5, -0.25]), n),
                    p,
                ),
                Just(n),
            )
        })
    }

    fn sigma_of(p: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..3.0f64, p)
    }

    proptest! {
        #[test]
        fn slack_is_convex(
            (b, rows, n) in instance(),
            seed in prop::collection::vec(0.0..3.0f64, 6),
            lambda in 0.0..=1.0f64,
        ) {
            let p = b.len();
            let f = PredictionMatrix::from_dense(&rows, n).unwrap();
            let b = CorrelationVector::new(b).unwrap();
            let s1 = w(&seed[..p]);
            let s2 = w(&seed[3..3 + p]);
            let mix: Vec<f64> = s1.as_slice().iter().zip(s2.as_slice())
                .map(|(a, c)| lambda * a + (1.0 - lambda) * c).collect();
            let lhs = slack(&w(&mix), &b, &f).unwrap();
            let rhs = lambda * slack(&s1, &b, &f).unwrap() + (1.0 - lambda) * slack(&s2, &b, &f).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn potential_lower_bound((b, rows, n) in instance(), raw in sigma_of(3)) {
            let p = b.len();
            let f = PredictionMatrix::from_dense(&rows, n).unwrap();
            let sigma = w(&raw[..p]);
            let bl: f64 = b.iter().zip(sigma.as_slice()).map(|(b, s)| b * s).sum();
            let b = CorrelationVector::new(b).unwrap();
            let g = slack(&sigma, &b, &f).unwrap();
            let scores = f.scores(sigma.as_slice()).unwrap();
            prop_assert!(g >= 1.0 - bl - 1e-12);
            if scores.iter().all(|s| s.abs() <= 1.0) {
                prop_assert!((g - (1.0 - bl)).abs() < 1e-12);
            } else {
                prop_assert!(g > 1.0 - bl);
            }
        }

        #[test]
        fn hallucination_opposes_score(s in -5.0..5.0f64) {
            let y = hallucinate(s).value() as f64;
            prop_assert_eq!(y == 0.0, s.abs() < 1.0);
            prop_assert!(y * s <= 0.0);
        }

        #[test]
        fn prediction_is_clip_fixed_point(raw in sigma_of(3), col in prop::collection::vec(-1.0..=1.0f64, 3)) {
            let g = predict(&w(&raw), &col).unwrap();
            prop_assert_eq!(clip(g), g);
        }
    }
}
