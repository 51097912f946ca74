//! Binomial upper bounds on member error rates and the correlation lower
//! bounds `b` derived from them.
//!
//! A member that errs with probability `p` on the examples it is awake on
//! has correlation `1 - 2p` with the true labels there. We bound `p` from
//! above with Wilson's score interval (Wald's interval is kept for reports),
//! so `b_i = (n_i / n) · (1 - 2 p_u)` holds with probability `1 - α` per
//! member. Members whose bound is not positive are pruned ("mowed").

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::slack::PredictionMatrix;

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation followed by one Halley step against
/// `erfc`, giving close to full double precision.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile level {q} outside (0, 1)")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;

    let tail = |r: f64| {
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let x = if q < LOW {
        tail((-2.0 * q.ln()).sqrt())
    } else if q > 1.0 - LOW {
        -tail((-2.0 * (1.0 - q).ln()).sqrt())
    } else {
        let r = q - 0.5;
        let s = r * r;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * r
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    };
    // Halley refinement
    let e = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - q;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Failure probability `α` of a one-sided interval and its normal quantile
/// `z_α = Φ⁻¹(1 - α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonParams {
    alpha: f64,
    z: f64,
}

impl WilsonParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
        }
        Ok(Self {
            alpha,
            z: normal_quantile(1.0 - alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Candidate failure probabilities for a labeled-set size, following the
    /// values found to work across datasets: `{0.003, 0.01, 0.03, 0.1}` for
    /// small `m`, `{0.01}` around 1K, `{0.001, 0.005}` around 10K and
    /// `{0.001}` from 100K.
    pub fn alpha_grid(m: usize) -> &'static [f64] {
        match m {
            0..=999 => &[0.003, 0.01, 0.03, 0.1],
            1_000..=9_999 => &[0.01],
            10_000..=99_999 => &[0.001, 0.005],
            _ => &[0.001],
        }
    }

    /// Default `α` for `m` labeled examples: 0.01 below 10K, 0.005 below
    /// 100K, then 0.001.
    pub fn default_alpha(m: usize) -> f64 {
        match m {
            0..=9_999 => 0.01,
            10_000..=99_999 => 0.005,
            _ => 0.001,
        }
    }
}

fn check_proportion(p_hat: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("binomial bound needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::invalid(format!("proportion {p_hat} outside [0, 1]")));
    }
    Ok(())
}

/// Wald upper bound `p̂ + z·√(p̂(1-p̂)/n)`, capped at 1.
pub fn wald_upper(p_hat: f64, n: usize, params: &WilsonParams) -> Result<f64> {
    check_proportion(p_hat, n)?;
    let n = n as f64;
    Ok((p_hat + params.z * (p_hat * (1.0 - p_hat) / n).sqrt()).min(1.0))
}

/// Wilson score upper bound, capped at 1.
pub fn wilson_upper(p_hat: f64, n: usize, params: &WilsonParams) -> Result<f64> {
    check_proportion(p_hat, n)?;
    let n = n as f64;
    let z2 = params.z * params.z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let spread = (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok((center + params.z * spread).max(p_hat).min(1.0))
}

/// Error counts of one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberErrorStats {
    /// Labeled examples on which the member is awake (`m_i`).
    pub labeled_awake: usize,
    /// Disagreements with the true label among those.
    pub errors: f64,
    /// Unlabeled examples on which the member is awake (`n_i`).
    pub unlabeled_awake: usize,
    /// Size of the unlabeled set (`n`).
    pub unlabeled_total: usize,
}

impl MemberErrorStats {
    pub fn error_rate(&self) -> Option<f64> {
        (self.labeled_awake > 0).then(|| self.errors / self.labeled_awake as f64)
    }

    fn awake_fraction(&self) -> f64 {
        if self.unlabeled_total == 0 {
            0.0
        } else {
            self.unlabeled_awake as f64 / self.unlabeled_total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    /// Predicts on every example (a stump or whole tree).
    AlwaysAwake,
    Specialist,
}

/// Correlation lower bound for one member.
///
/// Returns `-1` when the member is awake on no labeled example.
pub fn estimate_b(kind: MemberKind, stats: &MemberErrorStats, params: &WilsonParams) -> Result<f64> {
    let Some(p_hat) = stats.error_rate() else {
        return Ok(-1.0);
    };
    if stats.errors < 0.0 || p_hat > 1.0 {
        return Err(Error::invalid("error count exceeds awake count"));
    }
    if stats.unlabeled_awake > stats.unlabeled_total {
        return Err(Error::invalid("awake count exceeds unlabeled total"));
    }
    let p_u = wilson_upper(p_hat, stats.labeled_awake, params)?;
    let corr = 1.0 - 2.0 * p_u;
    Ok(match kind {
        MemberKind::AlwaysAwake => corr,
        MemberKind::Specialist => stats.awake_fraction() * corr,
    })
}

/// One row of the mow report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node_id: String,
    pub m_i: usize,
    pub p_hat: f64,
    pub wald_upper: f64,
    pub wilson_upper: f64,
    pub b: f64,
    pub kept: bool,
}

impl NodeReport {
    pub fn new(node_id: String, kind: MemberKind, stats: &MemberErrorStats, params: &WilsonParams) -> Result<Self> {
        let b = estimate_b(kind, stats, params)?;
        let (p_hat, wald, wilson) = match stats.error_rate() {
            Some(p) => (
                p,
                wald_upper(p, stats.labeled_awake, params)?,
                wilson_upper(p, stats.labeled_awake, params)?,
            ),
            None => (f64::NAN, 1.0, 1.0),
        };
        Ok(Self {
            node_id,
            m_i: stats.labeled_awake,
            p_hat,
            wald_upper: wald,
            wilson_upper: wilson,
            b,
            kept: b > 0.0,
        })
    }
}

/// Kept/total counts from pruning.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MowReport {
    pub kept: usize,
    pub total: usize,
}

impl MowReport {
    pub fn mowed(&self) -> usize {
        self.total - self.kept
    }
}

/// Keeps members with `b_i > 0`, preserving order.
pub fn prune_members<T>(members: Vec<T>, b: Vec<f64>) -> Result<(Vec<T>, Vec<f64>, MowReport)> {
    crate::error::check_len("correlation vector", members.len(), b.len())?;
    let total = members.len();
    let (kept, kept_b): (Vec<T>, Vec<f64>) = members
        .into_iter()
        .zip(b)
        .filter(|(_, b)| *b > 0.0)
        .unzip();
    let report = MowReport {
        kept: kept.len(),
        total,
    };
    Ok((kept, kept_b, report))
}

/// Writes mow-report rows as CSV.
pub fn write_mow_csv<W: std::io::Write>(rows: &[NodeReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Per-member error statistics from the members' predictions on a labeled
/// set (`on_labeled`, aligned with `labels`) and on the unlabeled set.
pub fn member_stats(
    on_labeled: &PredictionMatrix,
    labels: &[Label],
    on_unlabeled: &PredictionMatrix,
) -> Result<Vec<MemberErrorStats>> {
    crate::error::check_len("label count", on_labeled.n_cols(), labels.len())?;
    crate::error::check_len("member count", on_labeled.n_members(), on_unlabeled.n_members())?;
    Ok((0..on_labeled.n_members())
        .map(|i| {
            let mut awake = 0;
            let mut errors = 0.0;
            for (j, v) in on_labeled.row(i) {
                awake += 1;
                if v * f64::from(labels[j]) < 0.0 {
                    errors += 1.0;
                }
            }
            MemberErrorStats {
                labeled_awake: awake,
                errors,
                unlabeled_awake: on_unlabeled.awake_count(i),
                unlabeled_total: on_unlabeled.n_cols(),
            }
        })
        .collect())
}
