//! HedgeMower: a forest trained on a quarter of the labeled data, every tree
//! node turned into a specialist, Wilson bounds from the rest of the labeled
//! data, pruning, then slack minimization.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabeledSet};
use crate::error::{Error, Result};
use crate::estimation::{estimate_b, member_stats, MemberKind, MowReport, NodeReport, WilsonParams};
use crate::optimize::{minimize_slack, DescentOutcome};
use crate::predictor::Predictor;
use crate::slack::{CorrelationVector, WeightVector};
use crate::trees::{fit_forest, Ensemble, EnsembleMember, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeMowerVariant {
    /// Trees and all internal-node specialists, pruned at `b > 0`.
    Full,
    /// Only the whole trees, kept regardless of their bound.
    MinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeMowerConfig {
    pub trees: usize,
    pub wilson: WilsonParams,
    pub variant: HedgeMowerVariant,
    pub budget: usize,
    pub tree_params: TreeParams,
}

impl HedgeMowerConfig {
    pub fn new(trees: usize, wilson: WilsonParams, variant: HedgeMowerVariant) -> Self {
        Self {
            trees,
            wilson,
            variant,
            budget: 500,
            tree_params: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HedgeMowerRun {
    pub predictor: Predictor,
    pub mow: MowReport,
    /// One row per candidate member, in candidate order.
    pub nodes: Vec<NodeReport>,
    /// Set when every candidate was mowed and the predictor abstains.
    pub abstained: bool,
    pub descent: Option<DescentOutcome>,
    /// Indices into `L` used to grow the forest and to estimate `b`.
    pub forest_rows: Vec<usize>,
    pub estimate_rows: Vec<usize>,
}

/// Seeded split of `0..m` into a forest part of `max(1, ⌊m/4⌋)` indices and
/// the rest.
pub fn partition_labeled(m: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let k = (m / 4).max(1);
    let rest = idx.split_off(k);
    (idx, rest)
}

fn node_id(member: &EnsembleMember) -> String {
    match *member {
        EnsembleMember::Tree { tree } => format!("t{tree}"),
        EnsembleMember::Specialist { tree, node } => format!("t{tree}:n{node}"),
        EnsembleMember::Stump(s) => format!("stump:f{}", s.feature),
    }
}

pub fn run_hedgemower(l: &LabeledSet, u: &FeatureMatrix, config: &HedgeMowerConfig, seed: u64) -> Result<HedgeMowerRun> {
    if l.len() < 8 {
        return Err(Error::invalid(format!(
            "HedgeMower needs at least 8 labeled examples, got {}",
            l.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Empty("unlabeled set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (forest_rows, estimate_rows) = partition_labeled(l.len(), &mut rng);
    let l1 = l.select(&forest_rows);
    let l2 = l.select(&estimate_rows);
    let forest = fit_forest(&l1, config.trees, rng.next_u64(), &config.tree_params)?;

    let mut ensemble = Ensemble::new();
    let mut candidates = Vec::new();
    for tree in forest.trees {
        let t = ensemble.add_tree(tree);
        match config.variant {
            HedgeMowerVariant::Full => candidates.extend(ensemble.tree_candidates(t)),
            HedgeMowerVariant::MinusOne => candidates.push(EnsembleMember::Tree { tree: t }),
        }
    }
    let on_u = ensemble.prediction_rows(&candidates, u)?;
    let on_l2 = ensemble.prediction_rows(&candidates, l2.features())?;
    let stats = member_stats(&on_l2, l2.labels(), &on_u)?;

    let mut nodes = Vec::with_capacity(candidates.len());
    let mut keep = Vec::new();
    let mut b = Vec::new();
    for (i, (member, st)) in candidates.iter().zip(&stats).enumerate() {
        let kind = if member.is_specialist() {
            MemberKind::Specialist
        } else {
            MemberKind::AlwaysAwake
        };
        let mut report = NodeReport::new(node_id(member), kind, st, &config.wilson)?;
        let bi = estimate_b(kind, st, &config.wilson)?;
        if config.variant == HedgeMowerVariant::MinusOne {
            report.kept = true;
        }
        if report.kept {
            keep.push(i);
            b.push(bi);
        }
        nodes.push(report);
    }
    let mow = MowReport {
        kept: keep.len(),
        total: candidates.len(),
    };
    log::debug!("hedgemower kept {}/{} members", mow.kept, mow.total);

    if keep.is_empty() {
        log::warn!("every member was mowed; the predictor abstains");
        return Ok(HedgeMowerRun {
            predictor: Predictor::abstaining(),
            mow,
            nodes,
            abstained: true,
            descent: None,
            forest_rows,
            estimate_rows,
        });
    }
    let f = on_u.select_members(&keep);
    let b = CorrelationVector::new(b)?;
    let outcome = minimize_slack(&b, &f, &WeightVector::zeros(keep.len()), config.budget)?;
    ensemble.members = keep.iter().map(|&i| candidates[i]).collect();
    let predictor = Predictor::new(ensemble, outcome.sigma.clone(), b)?;
    Ok(HedgeMowerRun {
        predictor,
        mow,
        nodes,
        abstained: false,
        descent: Some(outcome),
        forest_rows,
        estimate_rows,
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::trees::tree_predict;

    fn separable(seed: u64, m: usize, n: usize) -> (LabeledSet, FeatureMatrix, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |k: usize| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for _ in 0..k {
                let v: f64 = rng.gen_range(-1.0..1.0);
                x.push(vec![v, rng.gen_range(-1.0..1.0)]);
                y.push(if v > 0.0 { 1 } else { -1 });
            }
            (FeatureMatrix::from_rows(&x).unwrap(), y)
        };
        let (lx, ly) = draw(m);
        let (ux, uy) = draw(n);
        (LabeledSet::new(lx, ly).unwrap(), ux, uy)
    }

    fn wilson() -> WilsonParams {
        WilsonParams::new(0.01).unwrap()
    }

    #[test]
    fn single_tree_minus_one() {
        let (l, u, _) = separable(1, 80, 200);
        let cfg = HedgeMowerConfig::new(1, wilson(), HedgeMowerVariant::MinusOne);
        let run = run_hedgemower(&l, &u, &cfg, 3).unwrap();
        assert_eq!(run.predictor.ensemble.members.len(), 1);
        assert_eq!(run.mow, MowReport { kept: 1, total: 1 });
        let tree = &run.predictor.ensemble.trees[0];
        for x in u.rows() {
            let s = run.predictor.score(x).unwrap();
            assert_eq!(s.signum(), f64::from(tree_predict(tree, x).unwrap()));
        }
    }

    #[test]
    fn chance_labels_are_mowed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<i8> = (0..60).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
        let l = LabeledSet::new(FeatureMatrix::from_rows(&x).unwrap(), y).unwrap();
        let u = FeatureMatrix::from_rows(&(0..50).map(|i| vec![i as f64 / 50.0]).collect::<Vec<_>>()).unwrap();
        let cfg = HedgeMowerConfig::new(10, WilsonParams::new(0.001).unwrap(), HedgeMowerVariant::Full);
        let run = run_hedgemower(&l, &u, &cfg, 1).unwrap();
        assert!(run.abstained);
        assert_eq!(run.mow.kept, 0);
        assert!(run.predictor.is_abstaining());
    }

    #[test]
    fn seeded_determinism() {
        let (l, u, _) = separable(2, 40, 60);
        let cfg = HedgeMowerConfig::new(5, wilson(), HedgeMowerVariant::Full);
        let a = run_hedgemower(&l, &u, &cfg, 9).unwrap();
        let b = run_hedgemower(&l, &u, &cfg, 9).unwrap();
        assert_eq!(a.forest_rows, b.forest_rows);
        assert_eq!(a.predictor, b.predictor);
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn data_hygiene() {
        let (l, u, _) = separable(3, 41, 30);
        let cfg = HedgeMowerConfig::new(4, wilson(), HedgeMowerVariant::Full);
        let run = run_hedgemower(&l, &u, &cfg, 5).unwrap();
        assert_eq!(run.forest_rows.len(), 10);
        assert_eq!(run.estimate_rows.len(), 31);
        let mut all: Vec<usize> = run.forest_rows.iter().chain(&run.estimate_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..41).collect::<Vec<_>>());
        // the forest is reproducible from the forest rows alone
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let _ = partition_labeled(41, &mut rng);
        let forest = fit_forest(&l.select(&run.forest_rows), 4, rng.next_u64(), &TreeParams::default()).unwrap();
        assert_eq!(forest.trees, run.predictor.ensemble.trees);
        // root statistics count exactly the estimation rows
        for r in run.nodes.iter().filter(|r| r.node_id.ends_with(":n0")) {
            assert_eq!(r.m_i, run.estimate_rows.len());
        }
    }

    #[test]
    fn mow_arithmetic() {
        let (l, u, _) = separable(5, 60, 80);
        let cfg = HedgeMowerConfig::new(6, wilson(), HedgeMowerVariant::Full);
        let run = run_hedgemower(&l, &u, &cfg, 2).unwrap();
        let internal: usize = run
            .predictor
            .ensemble
            .trees
            .iter()
            .map(|t| t.internal_nodes().len().max(1))
            .sum();
        assert_eq!(run.mow.total, internal);
        assert_eq!(run.mow.kept + run.mow.mowed(), internal);
        assert_eq!(run.nodes.iter().filter(|r| r.kept).count(), run.mow.kept);
    }

    #[test]
    fn full_variant_not_worse_when_superset() {
        let mut checked = 0;
        for seed in 0..6 {
            let (l, u, _) = separable(10 + seed, 80, 120);
            let full = run_hedgemower(&l, &u, &HedgeMowerConfig::new(3, wilson(), HedgeMowerVariant::Full), seed).unwrap();
            let minus = run_hedgemower(&l, &u, &HedgeMowerConfig::new(3, wilson(), HedgeMowerVariant::MinusOne), seed).unwrap();
            let roots_kept = full.nodes.iter().filter(|r| r.node_id.ends_with(":n0") || !r.node_id.contains(':')).all(|r| r.kept);
            if roots_kept && !full.abstained {
                let gf = full.descent.unwrap().gamma;
                let gm = minus.descent.unwrap().gamma;
                assert!(gf <= gm + 1e-3, "{gf} > {gm}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn too_few_labels() {
        let (l, u, _) = separable(6, 7, 10);
        let cfg = HedgeMowerConfig::new(2, wilson(), HedgeMowerVariant::Full);
        assert!(run_hedgemower(&l, &u, &cfg, 0).is_err());
    }
}
