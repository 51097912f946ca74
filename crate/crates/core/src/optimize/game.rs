//! Brute-force solver for tiny transductive games, used to check the slack
//! minimizer against the exact minimax value.
//!
//! The adversary picks `z ∈ [−1,1]ⁿ` with `(1/n)·F·z ≥ b`; the predictor
//! picks `g ∈ [−1,1]ⁿ` and pays `ℓ(z,g) = (1/n)Σ ½(1 − zⱼgⱼ)`. The value is
//! found through the dual form `V = ½ − (1/2n)·min_{z} ‖z‖₁` by enumerating
//! vertices, and the predictor's play by grid search plus pattern refinement
//! over `g`, scoring each `g` against every vertex of the adversary polytope.

use crate::error::{check_len, Error, Result};
use crate::slack::{CorrelationVector, PredictionMatrix};

const FEAS_TOL: f64 = 1e-9;
const MAX_EXAMPLES: usize = 6;
const MAX_MEMBERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub f: PredictionMatrix,
    pub b: CorrelationVector,
}

impl GameInstance {
    pub fn new(f: PredictionMatrix, b: CorrelationVector) -> Result<Self> {
        check_len("correlation vector", f.n_members(), b.len())?;
        Ok(Self { f, b })
    }

    pub fn n(&self) -> usize {
        self.f.n_cols()
    }

    /// Expected loss of predictor play `g` against adversary play `z`.
    pub fn loss(&self, z: &[f64], g: &[f64]) -> f64 {
        let n = z.len() as f64;
        z.iter().zip(g).map(|(zj, gj)| 0.5 * (1.0 - zj * gj)).sum::<f64>() / n
    }

    /// Half-spaces `a·z ≤ c` describing the adversary's feasible set.
    fn constraints(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n + self.f.n_members());
        for j in 0..n {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            out.push((a.clone(), 1.0));
            a[j] = -1.0;
            out.push((a, 1.0));
        }
        for (i, &bi) in self.b.as_slice().iter().enumerate() {
            let a = self.f.dense_row(i).iter().map(|v| -v / n as f64).collect();
            out.push((a, -bi));
        }
        out
    }

    fn feasible(&self, cons: &[(Vec<f64>, f64)], z: &[f64]) -> bool {
        cons.iter().all(|(a, c)| dot(a, z) <= c + FEAS_TOL)
    }

    /// All vertices of the adversary polytope.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let cons = self.constraints();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for_each_vertex(&cons, self.n(), |z| {
            if self.feasible(&cons, &z) && !out.iter().any(|v| close(v, &z)) {
                out.push(z);
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    /// Exact minimax value.
    pub value: f64,
    /// Near-optimal predictor play.
    pub predictor: Vec<f64>,
    /// Worst-case loss of `predictor`; within grid-refinement precision of
    /// `value`.
    pub predictor_loss: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

/// Solves `A z = c` by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut c: Vec<f64>) -> Option<Vec<f64>> {
    let n = c.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        c.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[r][k] -= factor * a[col][k];
                }
                c[r] -= factor * c[col];
            }
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r][k] * z[k]).sum();
        z[r] = (c[r] - tail) / a[r][r];
    }
    Some(z)
}

/// Calls `visit` on the intersection point of every `n`-subset of the given
/// hyperplanes that meets in a single point.
fn for_each_vertex(planes: &[(Vec<f64>, f64)], n: usize, mut visit: impl FnMut(Vec<f64>)) {
    let k = planes.len();
    if n == 0 || n > k {
        return;
    }
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let c = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(z) = solve_square(a, c) {
            visit(z);
        }
        // next combination in lexicographic order
        let mut i = n;
        while i > 0 && pick[i - 1] == k - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        pick[i - 1] += 1;
        for j in i..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Worst-case loss of `g` given the adversary's vertices.
fn worst_case(vertices: &[Vec<f64>], g: &[f64]) -> f64 {
    let n = g.len() as f64;
    let best = vertices.iter().map(|v| dot(v, g)).fold(f64::INFINITY, f64::min);
    0.5 - best / (2.0 * n)
}

fn grid_points(n: usize, step: f64) -> impl Iterator<Item = Vec<f64>> {
    let per_axis = (2.0 / step).round() as usize + 1;
    let total = per_axis.pow(n as u32);
    (0..total).map(move |mut code| {
        (0..n)
            .map(|_| {
                let k = code % per_axis;
                code /= per_axis;
                -1.0 + k as f64 * step
            })
            .collect()
    })
}

/// Exact minimax value and a near-optimal predictor for a tiny game
/// (`n ≤ 6`, at most 3 members).
pub fn solve_game_exact(instance: &GameInstance) -> Result<GameSolution> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::Empty("unlabeled set"));
    }
    if n > MAX_EXAMPLES || instance.f.n_members() > MAX_MEMBERS {
        return Err(Error::invalid(format!(
            "exact game solver handles n <= {MAX_EXAMPLES} and at most {MAX_MEMBERS} members"
        )));
    }
    let cons = instance.constraints();

    // min ‖z‖₁ over the polytope: the optimum sits on a vertex of the
    // polytope cut by the coordinate hyperplanes.
    let mut planes = cons.clone();
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push((a, 0.0));
    }
    let mut min_l1 = f64::INFINITY;
    for_each_vertex(&planes, n, |z| {
        if instance.feasible(&cons, &z) {
            min_l1 = min_l1.min(z.iter().map(|x| x.abs()).sum());
        }
    });
    if !min_l1.is_finite() {
        return Err(Error::Infeasible(
            "no labeling satisfies the correlation constraints".into(),
        ));
    }
    let value = 0.5 - min_l1 / (2.0 * n as f64);

    let vertices = instance.vertices();
    let step = match n {
        1 | 2 => 1.0 / 50.0,
        3 | 4 => 0.25,
        _ => 0.5,
    };
    let mut g = vec![0.0; n];
    let mut best = worst_case(&vertices, &g);
    for p in grid_points(n, step) {
        let v = worst_case(&vertices, &p);
        if v < best - 1e-15 {
            best = v;
            g = p;
        }
    }
    let mut h = step;
    while h >= 1e-9 {
        let mut improved = false;
        for offset in grid_points(n, 1.0) {
            let p: Vec<f64> = g
                .iter()
                .zip(&offset)
                .map(|(x, o)| (x + o * h).clamp(-1.0, 1.0))
                .collect();
            let v = worst_case(&vertices, &p);
            if v < best - 1e-15 {
                best = v;
                g = p;
                improved = true;
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    Ok(GameSolution {
        value,
        predictor: g,
        predictor_loss: best,
    })
}
