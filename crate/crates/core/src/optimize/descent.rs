//! Slack minimization over `σ ≥ 0` by projected descent with exact line
//! search.
//!
//! Each step moves along the steepest feasible descent direction of the
//! `ε`-subdifferential: examples whose margin is within `ε` of 1 are treated
//! as kinks and the minimum-norm element over them is found by a small
//! box-constrained least-squares solve. With no kinks this is the plain
//! projected negative subgradient. Every line-search bracket contains step 0,
//! so the recorded slack never increases.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::golden::{golden_memo, LineSearchSpec, Memo};
use crate::error::{check_len, Error, Result};
use crate::slack::{potential, sign, CorrelationVector, PredictionMatrix, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub max_iter: usize,
    pub line: LineSearchSpec,
    /// Smallest margin tolerance used to detect kinks.
    pub kink_tol: f64,
    /// Largest margin tolerance tried before declaring convergence.
    pub max_kink_tol: f64,
}

impl DescentConfig {
    pub fn with_budget(max_iter: usize) -> Self {
        Self {
            max_iter,
            ..Self::default()
        }
    }
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            line: LineSearchSpec::default(),
            kink_tol: 1e-7,
            max_kink_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub gamma: f64,
    /// Examples with margin ≥ 1.
    pub active_margins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub sigma: WeightVector,
    pub gamma: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// True when no descent direction was left (rather than running out of
    /// budget).
    pub converged: bool,
}

impl DescentOutcome {
    /// Minimax error bound `V = γ / 2`.
    pub fn value(&self) -> f64 {
        0.5 * self.gamma
    }

    pub fn write_trajectory_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.trajectory {
            w.serialize(p).map_err(|e| Error::invalid(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub step: f64,
    pub gamma_before: f64,
    pub gamma: f64,
    pub evaluations: usize,
}

/// `φ(s) = γ(proj₊(σ + s·d))`, evaluated incrementally while no coordinate
/// has hit zero.
struct Ray<'a> {
    sigma: &'a [f64],
    d: &'a [f64],
    b: &'a [f64],
    f: &'a PredictionMatrix,
    base: &'a [f64],
    weight: &'a [f64],
    n: f64,
    along: Vec<f64>,
    b_sigma: f64,
    b_d: f64,
    breakpoint: f64,
}

impl<'a> Ray<'a> {
    fn new(sigma: &'a [f64], d: &'a [f64], b: &'a [f64], cols: &'a Weighted<'a>, base: &'a [f64]) -> Self {
        let f = cols.f;
        let along = f.scores_unchecked(d);
        let breakpoint = sigma
            .iter()
            .zip(d)
            .filter(|(_, &di)| di < 0.0)
            .map(|(&s, &di)| s / -di)
            .fold(f64::INFINITY, f64::min);
        Self {
            sigma,
            d,
            b,
            f,
            base,
            weight: cols.weight,
            n: cols.n,
            along,
            b_sigma: dot(b, sigma),
            b_d: dot(b, d),
            breakpoint,
        }
    }

    fn point(&self, s: f64) -> Vec<f64> {
        self.sigma
            .iter()
            .zip(self.d)
            .map(|(&x, &d)| (x + s * d).max(0.0))
            .collect()
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= self.breakpoint {
            let well: f64 = self
                .base
                .iter()
                .zip(&self.along)
                .zip(self.weight)
                .map(|((&a, &v), &w)| w * potential(a + s * v))
                .sum();
            well / self.n - self.b_sigma - s * self.b_d
        } else {
            let p = self.point(s);
            let scores = self.f.scores_unchecked(&p);
            weighted_slack(&p, self.b, &scores, self.weight, self.n)
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Prediction matrix whose column `j` stands for `weight[j]` identical
/// unlabeled examples out of `n`.
struct Weighted<'a> {
    f: &'a PredictionMatrix,
    weight: &'a [f64],
    n: f64,
}

fn weighted_slack(sigma: &[f64], b: &[f64], scores: &[f64], weight: &[f64], n: f64) -> f64 {
    let well: f64 = scores.iter().zip(weight).map(|(&s, &w)| w * potential(s)).sum();
    well / n - dot(b, sigma)
}

/// Merges identical columns of `f`, returning the reduced matrix and each
/// kept column's multiplicity.
fn merge_columns(f: &PredictionMatrix) -> (PredictionMatrix, Vec<f64>) {
    let cols = Columns::new(f);
    let mut groups: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
    let mut group_of = Vec::with_capacity(f.n_cols());
    let mut weight: Vec<f64> = Vec::new();
    for j in 0..f.n_cols() {
        let key: Vec<(usize, u64)> = cols.col(j).map(|(i, v)| (i, v.to_bits())).collect();
        let next = weight.len();
        let g = *groups.entry(key).or_insert(next);
        if g == next {
            weight.push(0.0);
        }
        weight[g] += 1.0;
        group_of.push(g);
    }
    let mut merged = PredictionMatrix::new(weight.len());
    let mut seen = vec![usize::MAX; weight.len()];
    for i in 0..f.n_members() {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (j, v) in f.row(i) {
            let g = group_of[j];
            if seen[g] != i {
                seen[g] = i;
                entries.push((g, v));
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        merged
            .push_sparse_row(entries)
            .expect("entries come from a valid matrix");
    }
    (merged, weight)
}

fn search_ray(ray: &Ray<'_>, spec: &LineSearchSpec) -> (f64, f64, usize) {
    let mut memo = Memo::new(|s| ray.eval(s));
    let f0 = memo.eval(0.0);
    let mut lo = 0.0;
    let mut hi = spec.initial_upper;
    let mut f_hi = memo.eval(hi);
    if f_hi < f0 {
        for _ in 0..spec.max_expansions {
            let next = 2.0 * hi;
            let f_next = memo.eval(next);
            let still_falling = f_next < f_hi;
            lo = if still_falling { hi } else { lo };
            hi = next;
            f_hi = f_next;
            if !still_falling {
                break;
            }
        }
    }
    golden_memo(&mut memo, lo, hi, spec.tolerance);
    let (mut step, mut value) = memo
        .best_in(0.0, f64::INFINITY)
        .expect("step 0 was probed");
    if step == 0.0 {
        // Plateaus past a breakpoint can mislead the bracket; fall back to
        // halving toward 0 where a descent direction must pay off.
        let mut s = spec.initial_upper;
        for _ in 0..60 {
            s *= 0.5;
            if memo.eval(s) < f0 {
                golden_memo(&mut memo, 0.0, 2.0 * s, spec.tolerance);
                (step, value) = memo.best_in(0.0, f64::INFINITY).expect("probed");
                break;
            }
        }
    }
    (step, value, memo.evaluations())
}

/// Minimizes `γ(proj₊(σ + s·d))` over `s ≥ 0`.
///
/// The bracket `[0, c]` starts at `c = spec.initial_upper` and doubles while
/// `φ` keeps falling; the returned step is the best probe, so `γ` never
/// increases.
pub fn line_search(
    sigma: &WeightVector,
    direction: &[f64],
    b: &CorrelationVector,
    f: &PredictionMatrix,
    spec: &LineSearchSpec,
) -> Result<LineSearchResult> {
    spec.validate()?;
    check_len("direction", sigma.len(), direction.len())?;
    check_len("correlation vector", f.n_members(), b.len())?;
    check_len("weight vector", f.n_members(), sigma.len())?;
    if f.n_cols() == 0 {
        return Err(Error::Empty("unlabeled set"));
    }
    let base = f.scores_unchecked(sigma.as_slice());
    let ones = vec![1.0; f.n_cols()];
    let cols = Weighted {
        f,
        weight: &ones,
        n: f.n_cols() as f64,
    };
    let ray = Ray::new(sigma.as_slice(), direction, b.as_slice(), &cols, &base);
    let gamma_before = ray.eval(0.0);
    let (step, gamma, evaluations) = search_ray(&ray, spec);
    Ok(LineSearchResult {
        step,
        gamma_before,
        gamma,
        evaluations,
    })
}

/// Line search along a single coordinate using cached scores; returns the
/// step and the slack after it.
pub(crate) fn coordinate_step(
    sigma: &[f64],
    member: usize,
    b: &[f64],
    f: &PredictionMatrix,
    scores: &[f64],
    spec: &LineSearchSpec,
) -> (f64, f64) {
    let mut d = vec![0.0; sigma.len()];
    d[member] = 1.0;
    let ones = vec![1.0; f.n_cols()];
    let cols = Weighted {
        f,
        weight: &ones,
        n: f.n_cols() as f64,
    };
    let ray = Ray::new(sigma, &d, b, &cols, scores);
    let (step, gamma, _) = search_ray(&ray, spec);
    (step, gamma)
}

/// Column-major copy of the prediction matrix, for kink columns.
struct Columns {
    start: Vec<usize>,
    member: Vec<u32>,
    value: Vec<f64>,
}

impl Columns {
    fn new(f: &PredictionMatrix) -> Self {
        let n = f.n_cols();
        let mut count = vec![0usize; n + 1];
        for i in 0..f.n_members() {
            for (j, _) in f.row(i) {
                count[j + 1] += 1;
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let mut fill = count.clone();
        let nnz = count[n];
        let mut member = vec![0u32; nnz];
        let mut value = vec![0.0; nnz];
        for i in 0..f.n_members() {
            for (j, v) in f.row(i) {
                let k = fill[j];
                member[k] = i as u32;
                value[k] = v;
                fill[j] += 1;
            }
        }
        Self {
            start: count,
            member,
            value,
        }
    }

    fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.start[j]..self.start[j + 1];
        self.member[r.clone()]
            .iter()
            .map(|&i| i as usize)
            .zip(self.value[r].iter().copied())
    }
}

/// Residual whose norm the direction search minimizes: free coordinates keep
/// their component, coordinates pinned at zero only count a negative one.
fn residual(g: &[f64], sigma: &[f64], out: &mut [f64]) {
    for ((o, &gi), &si) in out.iter_mut().zip(g).zip(sigma) {
        *o = if si > 0.0 { gi } else { gi.min(0.0) };
    }
}

const QP_ITERS: usize = 200;

/// Steepest feasible descent direction over the `ε`-subdifferential.
fn descent_direction(
    sigma: &[f64],
    b: &[f64],
    w: &Weighted<'_>,
    cols: &Columns,
    scores: &[f64],
    eps: f64,
) -> Vec<f64> {
    let (f, n) = (w.f, w.n);
    let p = sigma.len();
    let mut active = vec![0.0; scores.len()];
    // kink columns carry their sign times their multiplicity
    let mut kinks: Vec<(usize, f64)> = Vec::new();
    for (j, &s) in scores.iter().enumerate() {
        let m = s.abs();
        if m > 1.0 + eps {
            active[j] = sign(s) * w.weight[j];
        } else if m >= 1.0 - eps {
            kinks.push((j, sign(s) * w.weight[j]));
        }
    }
    let g0: Vec<f64> = (0..p).map(|i| -b[i] + f.row_dot(i, &active) / n).collect();
    let mut r = vec![0.0; p];
    if kinks.is_empty() {
        residual(&g0, sigma, &mut r);
        return r.iter().map(|x| -x).collect();
    }

    // g(θ) = g0 + Σ_k θ_k a_k with a_k = sgn(s_k) F[:, k] / n, θ ∈ [0, 1]^K.
    let lipschitz: f64 = kinks
        .iter()
        .map(|&(j, sg)| sg * sg * cols.col(j).map(|(_, v)| v * v).sum::<f64>())
        .sum::<f64>()
        / (n * n);
    let g_of = |theta: &[f64]| {
        let mut g = g0.clone();
        for (&(j, sg), &t) in kinks.iter().zip(theta) {
            if t != 0.0 {
                for (i, v) in cols.col(j) {
                    g[i] += t * sg * v / n;
                }
            }
        }
        g
    };
    let objective = |g: &[f64], r: &mut [f64]| {
        residual(g, sigma, r);
        r.iter().map(|x| x * x).sum::<f64>()
    };

    // Start from the inclusive-boundary subgradient, then accelerated
    // projected gradient on θ.
    let mut theta = vec![1.0; kinks.len()];
    let mut best_theta = theta.clone();
    let mut best = objective(&g_of(&theta), &mut r);
    if lipschitz > 0.0 {
        let step = 1.0 / (2.0 * lipschitz);
        let mut y = theta.clone();
        let mut t_k = 1.0f64;
        for _ in 0..QP_ITERS {
            let g = g_of(&y);
            residual(&g, sigma, &mut r);
            let next: Vec<f64> = kinks
                .iter()
                .zip(&y)
                .map(|(&(j, sg), &yk)| {
                    let grad: f64 = 2.0 * sg * cols.col(j).map(|(i, v)| v * r[i]).sum::<f64>() / n;
                    (yk - step * grad).clamp(0.0, 1.0)
                })
                .collect();
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
            let momentum = (t_k - 1.0) / t_next;
            let moved: f64 = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            y = next
                .iter()
                .zip(&theta)
                .map(|(&a, &b)| (a + momentum * (a - b)).clamp(0.0, 1.0))
                .collect();
            theta = next;
            t_k = t_next;
            let val = objective(&g_of(&theta), &mut r);
            if val < best {
                best = val;
                best_theta.clone_from(&theta);
            }
            if moved < 1e-12 || best < 1e-30 {
                break;
            }
        }
    }
    let g = g_of(&best_theta);
    residual(&g, sigma, &mut r);
    r.iter().map(|x| -x).collect()
}

fn active_count(scores: &[f64], weight: &[f64]) -> usize {
    scores
        .iter()
        .zip(weight)
        .filter(|(s, _)| s.abs() >= 1.0)
        .map(|(_, &w)| w)
        .sum::<f64>() as usize
}

/// Projected descent on `γ` from `σ₀` with the default configuration and the
/// given iteration budget.
pub fn minimize_slack(
    b: &CorrelationVector,
    f: &PredictionMatrix,
    sigma0: &WeightVector,
    max_iter: usize,
) -> Result<DescentOutcome> {
    minimize_slack_with(b, f, sigma0, &DescentConfig::with_budget(max_iter))
}

pub fn minimize_slack_with(
    b: &CorrelationVector,
    f: &PredictionMatrix,
    sigma0: &WeightVector,
    config: &DescentConfig,
) -> Result<DescentOutcome> {
    config.line.validate()?;
    check_len("correlation vector", f.n_members(), b.len())?;
    check_len("weight vector", f.n_members(), sigma0.len())?;
    if f.n_cols() == 0 {
        return Err(Error::Empty("unlabeled set"));
    }
    let b = b.as_slice();
    let (merged, weight) = merge_columns(f);
    let w = Weighted {
        f: &merged,
        weight: &weight,
        n: f.n_cols() as f64,
    };
    let f = &merged;
    let mut sigma = sigma0.as_slice().to_vec();
    let mut scores = f.scores_unchecked(&sigma);
    let mut gamma = weighted_slack(&sigma, b, &scores, w.weight, w.n);
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        gamma,
        active_margins: active_count(&scores, w.weight),
    }];
    if f.n_members() == 0 {
        return Ok(DescentOutcome {
            sigma: WeightVector::zeros(0),
            gamma,
            trajectory,
            converged: true,
        });
    }

    let cols = Columns::new(f);
    let mut eps = config.kink_tol;
    let mut converged = false;
    for iteration in 1..=config.max_iter {
        let mut d = descent_direction(&sigma, b, &w, &cols, &scores, eps);
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut improved = false;
        if scale > 1e-13 {
            d.iter_mut().for_each(|x| *x = if x.abs() < 1e-12 * scale { 0.0 } else { *x / scale });
            let ray = Ray::new(&sigma, &d, b, &w, &scores);
            let (step, _, _) = search_ray(&ray, &config.line);
            if step > 0.0 {
                let next = ray.point(step);
                let next_scores = f.scores_unchecked(&next);
                let next_gamma = weighted_slack(&next, b, &next_scores, w.weight, w.n);
                if next_gamma < gamma - 1e-15 * gamma.abs().max(1.0) {
                    sigma = next;
                    scores = next_scores;
                    gamma = next_gamma;
                    improved = true;
                }
            }
        }
        if improved {
            eps = (eps / 10.0).max(config.kink_tol);
        } else if eps < config.max_kink_tol {
            eps = (eps * 10.0).min(config.max_kink_tol);
        } else {
            converged = true;
        }
        trajectory.push(TrajectoryPoint {
            iteration,
            gamma,
            active_margins: active_count(&scores, w.weight),
        });
        if converged {
            break;
        }
    }
    Ok(DescentOutcome {
        sigma: WeightVector::from_projected(sigma),
        gamma,
        trajectory,
        converged,
    })
}

/// Total correction: re-minimize over the whole current ensemble, warm
/// started at `σ`, with a fixed iteration budget (100 by default in the
/// boosters).
pub fn total_correct(
    b: &CorrelationVector,
    f: &PredictionMatrix,
    sigma: &WeightVector,
    budget: usize,
) -> Result<DescentOutcome> {
    minimize_slack(b, f, sigma, budget)
}

/// One-sided derivatives `(left, right)` of `γ` along each coordinate at `σ`,
/// treating margins within `tol` of 1 as kinks.
pub fn coordinate_derivatives(
    sigma: &WeightVector,
    b: &CorrelationVector,
    f: &PredictionMatrix,
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    check_len("correlation vector", f.n_members(), b.len())?;
    let scores = f.scores(sigma.as_slice())?;
    let n = scores.len() as f64;
    Ok((0..f.n_members())
        .map(|i| {
            let (mut left, mut right) = (0.0, 0.0);
            for (j, v) in f.row(i) {
                let s = scores[j];
                let m = s.abs();
                if m > 1.0 + tol {
                    left += sign(s) * v;
                    right += sign(s) * v;
                } else if m >= 1.0 - tol {
                    let out = sign(s) * v;
                    left += out.min(0.0);
                    right += out.max(0.0);
                }
            }
            (-b.as_slice()[i] + left / n, -b.as_slice()[i] + right / n)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::slack::slack_from_scores;
    use crate::slack::{slack, slack_subgradient};

    fn one_member() -> (CorrelationVector, PredictionMatrix) {
        (
            CorrelationVector::new(vec![0.5]).unwrap(),
            PredictionMatrix::from_dense(&[vec![1.0, -1.0]], 2).unwrap(),
        )
    }

    #[test]
    fn line_search_single_member() {
        let (b, f) = one_member();
        let r = line_search(&WeightVector::zeros(1), &[1.0], &b, &f, &LineSearchSpec::default()).unwrap();
        assert_abs_diff_eq!(r.step, 1.0, epsilon = 1e-5);
        assert_eq!(r.gamma_before, 1.0);
        assert_abs_diff_eq!(r.gamma, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn line_search_zero_direction() {
        let (b, f) = one_member();
        let sigma = WeightVector::new(vec![0.3]).unwrap();
        let r = line_search(&sigma, &[0.0], &b, &f, &LineSearchSpec::default()).unwrap();
        assert_eq!(r.gamma, r.gamma_before);
    }

    #[test]
    fn line_search_at_optimum() {
        let (b, f) = one_member();
        let sigma = WeightVector::new(vec![1.0]).unwrap();
        let g = slack_subgradient(&sigma, &b, &f).unwrap();
        let d: Vec<f64> = g.iter().map(|x| -x).collect();
        let r = line_search(&sigma, &d, &b, &f, &LineSearchSpec::default()).unwrap();
        assert_abs_diff_eq!(r.gamma, r.gamma_before, epsilon = 1e-6);
    }

    #[test]
    fn minimize_single_member() {
        let (b, f) = one_member();
        let out = minimize_slack(&b, &f, &WeightVector::zeros(1), 100).unwrap();
        assert_abs_diff_eq!(out.sigma.as_slice()[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(out.gamma, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(out.value(), 0.25, epsilon = 1e-6);
    }

    #[test]
    fn minimize_empty_ensemble() {
        let f = PredictionMatrix::new(5);
        let out = minimize_slack(&CorrelationVector::default(), &f, &WeightVector::zeros(0), 10).unwrap();
        assert_eq!(out.gamma, 1.0);
        assert_eq!(out.value(), 0.5);
    }

    #[test]
    fn duplicated_member_matches_single() {
        let b = CorrelationVector::new(vec![0.5, 0.5]).unwrap();
        let f = PredictionMatrix::from_dense(&[vec![1.0, -1.0], vec![1.0, -1.0]], 2).unwrap();
        let out = minimize_slack(&b, &f, &WeightVector::zeros(2), 100).unwrap();
        // γ(σ1, σ2) = -0.5(σ1+σ2) + max(1, σ1+σ2): grid oracle minimum 0.5
        let mut grid_min = f64::INFINITY;
        for a in 0..=60 {
            for c in 0..=60 {
                let s = WeightVector::new(vec![a as f64 / 20.0, c as f64 / 20.0]).unwrap();
                grid_min = grid_min.min(slack(&s, &b, &f).unwrap());
            }
        }
        assert_abs_diff_eq!(grid_min, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.gamma, grid_min, epsilon = 1e-6);
    }

    #[test]
    fn total_correct_budget_and_warm_start() {
        let (b, f) = one_member();
        let start = WeightVector::new(vec![0.2]).unwrap();
        let same = total_correct(&b, &f, &start, 0).unwrap();
        assert_eq!(same.sigma, start);
        let out = total_correct(&b, &f, &start, 100).unwrap();
        assert!(out.gamma <= slack(&start, &b, &f).unwrap());
        assert_abs_diff_eq!(out.sigma.as_slice()[0], 1.0, epsilon = 1e-5);
    }

    fn random_instance(rng: &mut ChaCha8Rng, p: usize, n: usize) -> (CorrelationVector, PredictionMatrix) {
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| [-1.0, 0.0, 1.0][rng.gen_range(0..3)]).collect())
            .collect();
        let f = PredictionMatrix::from_dense(&rows, n).unwrap();
        let b = (0..p)
            .map(|i| {
                let cap = f.awake_count(i) as f64 / n as f64;
                rng.gen_range(0.0..0.6) * cap
            })
            .collect();
        (CorrelationVector::new(b).unwrap(), f)
    }

    #[test]
    fn trajectory_never_increases_and_certifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let p = rng.gen_range(1..6);
            let n = rng.gen_range(2..30);
            let (b, f) = random_instance(&mut rng, p, n);
            let out = minimize_slack(&b, &f, &WeightVector::zeros(p), 500).unwrap();
            for w in out.trajectory.windows(2) {
                assert!(w[1].gamma <= w[0].gamma + 1e-12);
            }
            if out.converged {
                let derivs = coordinate_derivatives(&out.sigma, &b, &f, 1e-4).unwrap();
                for (&s, &(left, right)) in out.sigma.as_slice().iter().zip(&derivs) {
                    assert!(right >= -5e-3, "right derivative {right}");
                    if s > 0.0 {
                        assert!(left <= 5e-3, "left derivative {left}");
                    }
                }
            }
        }
    }

    #[test]
    fn merged_columns_keep_the_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (b, small) = random_instance(&mut rng, 3, 5);
            // every column repeated a random number of times
            let reps: Vec<usize> = (0..5).map(|_| rng.gen_range(1..4)).collect();
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    let r = small.dense_row(i);
                    (0..5).flat_map(|j| std::iter::repeat(r[j]).take(reps[j])).collect()
                })
                .collect();
            let n: usize = reps.iter().sum();
            let f = PredictionMatrix::from_dense(&rows, n).unwrap();
            let (merged, weight) = merge_columns(&f);
            assert!(merged.n_cols() <= 5);
            assert_eq!(weight.iter().sum::<f64>(), n as f64);
            let sigma: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..2.0)).collect();
            let direct = slack_from_scores(&sigma, b.as_slice(), &f.scores_unchecked(&sigma));
            let reduced = weighted_slack(&sigma, b.as_slice(), &merged.scores_unchecked(&sigma), &weight, n as f64);
            assert_abs_diff_eq!(direct, reduced, epsilon = 1e-12);
        }
    }

    #[test]
    fn restricted_slack_is_unimodal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (b, f) = random_instance(&mut rng, 3, 12);
            let sigma: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.5)).collect();
            let d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let base = f.scores_unchecked(&sigma);
            let ones = vec![1.0; f.n_cols()];
            let cols = Weighted {
                f: &f,
                weight: &ones,
                n: f.n_cols() as f64,
            };
            let ray = Ray::new(&sigma, &d, b.as_slice(), &cols, &base);
            // convex until the first coordinate is clamped at zero
            let end = ray.breakpoint.min(5.0);
            let vals: Vec<f64> = (0..100).map(|k| ray.eval(k as f64 * end / 99.0)).collect();
            for w in vals.windows(3) {
                assert!(!(w[1] > w[0] + 1e-12 && w[1] > w[2] + 1e-12), "interior maximum");
            }
        }
    }

    #[test]
    fn trajectory_csv() {
        let (b, f) = one_member();
        let out = minimize_slack(&b, &f, &WeightVector::zeros(1), 5).unwrap();
        let mut buf = Vec::new();
        out.write_trajectory_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,gamma,active_margins\n0,1.0,0\n"));
    }
}
