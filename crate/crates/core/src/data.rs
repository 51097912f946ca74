//! Row-major feature storage and the labeled set handed to learners.
//!
//! Unlabeled data is passed around as a bare [`FeatureMatrix`]; there is no
//! type that pairs it with labels outside of the evaluation code in
//! [`crate::bench`].

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Binary class label, always `-1` or `+1`.
pub type Label = i8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("feature data length", n_rows * n_cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            check_len("row width", n_cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            data: Vec::new(),
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        check_len("row width", self.n_cols, row.len())?;
        self.data.extend_from_slice(row);
        self.n_rows += 1;
        Ok(())
    }

    /// New matrix made of the given rows, in the given order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    /// Zero-pads (sparse semantics) every row to `n_cols` columns.
    pub fn widen(&self, n_cols: usize) -> Self {
        if n_cols <= self.n_cols {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for row in self.rows() {
            data.extend_from_slice(row);
            data.resize(data.len() + n_cols - self.n_cols, 0.0);
        }
        Self {
            n_rows: self.n_rows,
            n_cols,
            data,
        }
    }
}

/// Features with their true `±1` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    x: FeatureMatrix,
    y: Vec<Label>,
}

impl LabeledSet {
    pub fn new(x: FeatureMatrix, y: Vec<Label>) -> Result<Self> {
        check_len("label count", x.n_rows(), y.len())?;
        if let Some(bad) = y.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::invalid(format!("label {bad} is not ±1")));
        }
        Ok(Self { x, y })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn labels(&self) -> &[Label] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}
