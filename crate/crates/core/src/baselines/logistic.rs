use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Label, LabeledSet};
use crate::error::{Error, Result};

/// Linear scorer `w·z + c` over standardized features `z = (x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.weights.len() {
            return Err(Error::DimensionMismatch {
                what: "feature row",
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.intercept
            + (0..self.weights.len())
                .map(|k| self.weights[k] * (x[k] - self.mean[k]) / self.scale[k])
                .sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LinearModel,
    /// Mean log-loss before the first epoch and after each epoch.
    pub losses: Vec<f64>,
}

/// `ln(1 + e^{-t})` without overflow.
fn log1p_exp_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss `(1/m) Σ ln(1 + exp(-yᵢ(w·xᵢ + c)))`.
pub fn logistic_loss(w: &[f64], c: f64, x: &FeatureMatrix, y: &[Label]) -> f64 {
    let m = y.len() as f64;
    x.rows()
        .zip(y)
        .map(|(r, &yi)| log1p_exp_neg(f64::from(yi) * (dot(w, r) + c)))
        .sum::<f64>()
        / m
}

/// Gradient of [`logistic_loss`]: `(∂/∂w, ∂/∂c)`.
pub fn logistic_gradient(w: &[f64], c: f64, x: &FeatureMatrix, y: &[Label]) -> (Vec<f64>, f64) {
    let m = y.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gc = 0.0;
    for (r, &yi) in x.rows().zip(y) {
        let yi = f64::from(yi);
        let coef = -yi * sigmoid(-yi * (dot(w, r) + c)) / m;
        for (g, v) in gw.iter_mut().zip(r) {
            *g += coef * v;
        }
        gc += coef;
    }
    (gw, gc)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn standardize(x: &FeatureMatrix) -> (FeatureMatrix, Vec<f64>, Vec<f64>) {
    let (m, d) = (x.n_rows() as f64, x.n_cols());
    let mut mean = vec![0.0; d];
    for r in x.rows() {
        for (a, v) in mean.iter_mut().zip(r) {
            *a += v / m;
        }
    }
    let mut scale = vec![0.0; d];
    for r in x.rows() {
        for k in 0..d {
            scale[k] += (r[k] - mean[k]).powi(2) / m;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let mut z = FeatureMatrix::empty(d);
    let mut row = vec![0.0; d];
    for r in x.rows() {
        for k in 0..d {
            row[k] = (r[k] - mean[k]) / scale[k];
        }
        z.push_row(&row).expect("finite by construction");
    }
    (z, mean, scale)
}

/// Full-batch gradient descent on the mean log-loss over standardized
/// features. A step that would raise the loss is halved until it does not,
/// so the recorded losses never increase.
pub fn logistic_fit(l: &LabeledSet, epochs: usize, learning_rate: f64) -> Result<LogisticFit> {
    if l.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    if !(learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let (z, mean, scale) = standardize(l.features());
    let y = l.labels();
    let mut w = vec![0.0; z.n_cols()];
    let mut c = 0.0;
    let mut loss = logistic_loss(&w, c, &z, y);
    let mut losses = vec![loss];
    for _ in 0..epochs {
        let (gw, gc) = logistic_gradient(&w, c, &z, y);
        let mut lr = learning_rate;
        let mut accepted = false;
        for _ in 0..50 {
            let w2: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - lr * g).collect();
            let c2 = c - lr * gc;
            let l2 = logistic_loss(&w2, c2, &z, y);
            if l2 <= loss {
                w = w2;
                c = c2;
                loss = l2;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        losses.push(loss);
        if !accepted {
            break;
        }
    }
    Ok(LogisticFit {
        model: LinearModel {
            weights: w,
            intercept: c,
            mean,
            scale,
        },
        losses,
    })
}
