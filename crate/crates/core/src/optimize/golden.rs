use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings shared by golden-section search and the bracketing line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchSpec {
    /// Final bracket width on the argument.
    pub tolerance: f64,
    /// Maximum number of times the bracket end is doubled.
    pub max_expansions: u32,
    /// First bracket end tried.
    pub initial_upper: f64,
}

impl Default for LineSearchSpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_expansions: 10,
            initial_upper: 4.0,
        }
    }
}

impl LineSearchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.initial_upper > 0.0) {
            return Err(Error::invalid("line search tolerance and bracket must be positive"));
        }
        Ok(())
    }
}

/// Caches function values by abscissa so repeated probes are free.
pub(crate) struct Memo<F> {
    f: F,
    values: HashMap<u64, f64>,
}

impl<F: FnMut(f64) -> f64> Memo<F> {
    pub(crate) fn new(f: F) -> Self {
        Self {
            f,
            values: HashMap::new(),
        }
    }

    pub(crate) fn eval(&mut self, x: f64) -> f64 {
        let f = &mut self.f;
        *self.values.entry(x.to_bits()).or_insert_with(|| f(x))
    }

    pub(crate) fn evaluations(&self) -> usize {
        self.values.len()
    }

    /// Lowest value seen within `[lo, hi]`, ties to the smaller abscissa.
    pub(crate) fn best_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.values
            .iter()
            .map(|(&bits, &v)| (f64::from_bits(bits), v))
            .filter(|&(x, _)| x >= lo && x <= hi)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

pub(crate) fn golden_memo<F: FnMut(f64) -> f64>(memo: &mut Memo<F>, mut a: f64, mut c: f64, tol: f64) {
    memo.eval(a);
    memo.eval(c);
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = memo.eval(x1);
    let mut f2 = memo.eval(x2);
    while c - a > tol {
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = memo.eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = memo.eval(x2);
        }
    }
}

/// Golden-section minimization of a unimodal `f` on `[a, c]`.
///
/// The endpoints are probed too, so a boundary minimum is returned exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(f: F, a: f64, c: f64, tolerance: f64) -> Result<GoldenResult> {
    if !(a < c) {
        return Err(Error::invalid(format!("empty bracket [{a}, {c}]")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut memo = Memo::new(f);
    golden_memo(&mut memo, a, c, tolerance);
    let (x, fx) = memo.best_in(a, c).expect("bracket was probed");
    Ok(GoldenResult {
        x,
        fx,
        evaluations: memo.evaluations(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_minimum() {
        let r = golden_section(|x| (x - 2.0).powi(2), 0.0, 5.0, 1e-6).unwrap();
        assert!((r.x - 2.0).abs() < 1e-5);
        assert!(r.evaluations < 50);
    }

    #[test]
    fn nonsmooth_minimum() {
        let r = golden_section(|x: f64| (x - 1.0).abs(), 0.0, 3.0, 1e-6).unwrap();
        assert!((r.x - 1.0).abs() < 1e-5);
    }

    #[test]
    fn boundary_minimum() {
        let r = golden_section(|x| x, 0.0, 1.0, 1e-6).unwrap();
        assert!(r.x.abs() <= 1e-6);
        let r = golden_section(|x| -x, 0.0, 1.0, 1e-6).unwrap();
        assert_eq!(r.x, 1.0);
    }

    #[test]
    fn memo_serves_repeats() {
        let mut calls = 0;
        let mut memo = Memo::new(|x: f64| {
            calls += 1;
            x * x
        });
        memo.eval(1.0);
        memo.eval(1.0);
        assert_eq!(memo.evaluations(), 1);
        drop(memo);
        assert_eq!(calls, 1);
    }

    #[test]
    fn rejects_empty_bracket() {
        assert!(golden_section(|x| x, 1.0, 1.0, 1e-6).is_err());
        assert!(golden_section(|x| x, 0.0, 1.0, 0.0).is_err());
    }
}
