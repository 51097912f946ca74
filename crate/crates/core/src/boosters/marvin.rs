//! MARVIN: boosting by greedy coordinate descent on the slack function, with
//! hallucinated labels on the confidently scored unlabeled examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{build_oracle_dataset, oracle_best, Hypothesis, OracleDataset, WeakLearner};
use crate::bench::{minibatch_stream, MinibatchStream, StreamConfig};
use crate::data::{FeatureMatrix, LabeledSet};
use crate::error::{Error, Result};
use crate::estimation::{estimate_b, member_stats, MemberErrorStats, MemberKind, MowReport, WilsonParams};
use crate::hedgemower::partition_labeled;
use crate::optimize::{coordinate_step, minimize_slack_with, DescentConfig, LineSearchSpec};
use crate::predictor::Predictor;
use crate::slack::{slack_from_scores, CorrelationVector, PredictionMatrix, WeightVector};
use crate::trees::{Ensemble, EnsembleMember};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One coordinate line search per added member.
    Plain,
    /// Coordinate step followed by total correction.
    Corrective,
    /// Adds the new tree's node specialists, then total correction.
    Specialists,
}

/// How the labeled set is shared between the oracle and the estimates of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabeledUse {
    /// All of `L` feeds both.
    Shared,
    /// A random quarter of `L` feeds the oracle and the rest estimates `b`.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarvinConfig {
    pub iterations: usize,
    pub variant: Variant,
    pub learner: WeakLearner,
    pub wilson: WilsonParams,
    /// Iteration budget of each total correction.
    pub correction_budget: usize,
    /// Consecutive iterations without slack decrease before stopping.
    pub patience: usize,
    pub line: LineSearchSpec,
    /// Stream minibatches of `U` instead of using it whole.
    pub streaming: Option<StreamConfig>,
    pub labeled_use: LabeledUse,
    /// Multiply oracle row weights by bootstrap counts each iteration, so
    /// repeated calls on similar data still return different trees.
    pub bootstrap: bool,
    pub seed: u64,
}

impl MarvinConfig {
    pub fn new(iterations: usize, variant: Variant, wilson: WilsonParams) -> Self {
        Self {
            iterations,
            variant,
            learner: WeakLearner::default(),
            wilson,
            correction_budget: 100,
            patience: 5,
            line: LineSearchSpec::default(),
            streaming: None,
            labeled_use: LabeledUse::Split,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Ensemble under construction together with its cached scores on the
/// current unlabeled batch.
#[derive(Debug, Clone)]
pub struct BoostState {
    ensemble: Ensemble,
    kinds: Vec<MemberKind>,
    stats: Vec<MemberErrorStats>,
    sigma: Vec<f64>,
    b: Vec<f64>,
    f: PredictionMatrix,
    scores: Vec<f64>,
    mow: MowReport,
}

/// What one boosting step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub added: usize,
    pub gamma_before: f64,
    pub gamma: f64,
}

impl BoostState {
    pub fn new(n_unlabeled: usize) -> Self {
        Self {
            ensemble: Ensemble::new(),
            kinds: Vec::new(),
            stats: Vec::new(),
            sigma: Vec::new(),
            b: Vec::new(),
            f: PredictionMatrix::new(n_unlabeled),
            scores: vec![0.0; n_unlabeled],
            mow: MowReport::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn prediction_matrix(&self) -> &PredictionMatrix {
        &self.f
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// Kept/total candidates seen by pruning (specialist variant).
    pub fn mow_report(&self) -> MowReport {
        self.mow
    }

    pub fn gamma(&self) -> f64 {
        slack_from_scores(&self.sigma, &self.b, &self.scores)
    }

    /// Largest gap between the cached scores and a full recomputation.
    pub fn score_drift(&self) -> f64 {
        self.f
            .scores_unchecked(&self.sigma)
            .iter()
            .zip(&self.scores)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn predictor(&self) -> Result<Predictor> {
        Predictor::new(
            self.ensemble.clone(),
            WeightVector::new(self.sigma.clone())?,
            CorrelationVector::new(self.b.clone())?,
        )
    }

    /// Appends `members` at weight 0 with `b` estimated on `l`; with `prune`
    /// only members with `b > 0` are kept. Returns how many were added.
    fn add_members(
        &mut self,
        members: Vec<EnsembleMember>,
        l: &LabeledSet,
        u: &FeatureMatrix,
        wilson: &WilsonParams,
        prune: bool,
    ) -> Result<usize> {
        let on_l = self.ensemble.prediction_rows(&members, l.features())?;
        let on_u = self.ensemble.prediction_rows(&members, u)?;
        let stats = member_stats(&on_l, l.labels(), &on_u)?;
        let mut keep = Vec::new();
        let total = members.len();
        for (i, (member, st)) in members.into_iter().zip(stats).enumerate() {
            let kind = if member.is_specialist() {
                MemberKind::Specialist
            } else {
                MemberKind::AlwaysAwake
            };
            let b = estimate_b(kind, &st, wilson)?;
            if prune && b <= 0.0 {
                continue;
            }
            keep.push(i);
            self.ensemble.push(member);
            self.kinds.push(kind);
            self.stats.push(st);
            self.sigma.push(0.0);
            self.b.push(b);
        }
        if prune {
            self.mow.kept += keep.len();
            self.mow.total += total;
        }
        self.f.append(on_u.select_members(&keep));
        Ok(keep.len())
    }

    /// Moves to a new unlabeled batch: rebuilds `F`, the awake fractions in
    /// `b` and the scores. Error statistics on `L` are kept.
    pub fn rebatch(&mut self, u: &FeatureMatrix, wilson: &WilsonParams) -> Result<()> {
        self.f = self.ensemble.prediction_rows(&self.ensemble.members, u)?;
        for i in 0..self.len() {
            self.stats[i].unlabeled_awake = self.f.awake_count(i);
            self.stats[i].unlabeled_total = u.n_rows();
            self.b[i] = estimate_b(self.kinds[i], &self.stats[i], wilson)?;
        }
        self.scores = self.f.scores_unchecked(&self.sigma);
        Ok(())
    }

    fn correct(&mut self, config: &MarvinConfig) -> Result<()> {
        let descent = DescentConfig {
            max_iter: config.correction_budget,
            line: config.line,
            ..DescentConfig::default()
        };
        let out = minimize_slack_with(
            &CorrelationVector::new(self.b.clone())?,
            &self.f,
            &WeightVector::new(self.sigma.clone())?,
            &descent,
        )?;
        self.sigma = out.sigma.into_inner();
        self.scores = self.f.scores_unchecked(&self.sigma);
        Ok(())
    }

    /// Adds hypothesis `h` as the variant prescribes and updates the weights.
    pub fn step(
        &mut self,
        h: Hypothesis,
        l: &LabeledSet,
        u: &FeatureMatrix,
        config: &MarvinConfig,
    ) -> Result<StepOutcome> {
        let gamma_before = self.gamma();
        let members = match h {
            Hypothesis::Stump(s) => vec![EnsembleMember::Stump(s)],
            Hypothesis::Tree(t) => {
                let idx = self.ensemble.add_tree(t);
                match config.variant {
                    Variant::Specialists => self.ensemble.tree_candidates(idx),
                    _ => vec![EnsembleMember::Tree { tree: idx }],
                }
            }
        };
        let first = self.len();
        let prune = config.variant == Variant::Specialists;
        let added = self.add_members(members, l, u, &config.wilson, prune)?;
        if added > 0 {
            if config.variant != Variant::Specialists {
                let (step, _) = coordinate_step(&self.sigma, first, &self.b, &self.f, &self.scores, &config.line);
                if step > 0.0 {
                    self.sigma[first] += step;
                    self.f.axpy_row(first, step, &mut self.scores);
                }
            }
            if config.variant != Variant::Plain {
                self.correct(config)?;
            }
        }
        Ok(StepOutcome {
            added,
            gamma_before,
            gamma: self.gamma(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct MarvinRun {
    pub predictor: Predictor,
    /// Slack on the current batch: entry 0 is the start, entry `t` is after
    /// iteration `t`.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub stopped_early: bool,
    pub mow: MowReport,
}

struct Batches<'a> {
    u: &'a FeatureMatrix,
    stream: Option<(MinibatchStream, usize)>,
    current: Option<FeatureMatrix>,
}

impl<'a> Batches<'a> {
    fn new(u: &'a FeatureMatrix, config: Option<StreamConfig>) -> Result<Self> {
        let mut out = Self {
            u,
            stream: None,
            current: None,
        };
        if let Some(c) = config {
            if c.stride == 0 {
                return Err(Error::invalid("stride must be positive"));
            }
            let mut s = minibatch_stream(u.n_rows(), c.batch_size, c.policy, c.seed)?;
            let first = s.next().expect("stream is endless");
            out.current = Some(u.select(&first));
            out.stream = Some((s, c.stride));
        }
        Ok(out)
    }

    fn get(&self) -> &FeatureMatrix {
        self.current.as_ref().unwrap_or(self.u)
    }

    /// Swaps in a new batch before iteration `t` when due.
    fn advance(&mut self, t: usize) -> bool {
        match &mut self.stream {
            Some((s, stride)) if t > 1 && (t - 1) % *stride == 0 => {
                let idx = s.next().expect("stream is endless");
                self.current = Some(self.u.select(&idx));
                true
            }
            _ => false,
        }
    }
}

/// Reweights rows by their counts in a bootstrap resample; rows drawn zero
/// times are dropped.
fn bootstrap(data: OracleDataset, rng: &mut ChaCha8Rng) -> OracleDataset {
    let k = data.len();
    let mut counts = vec![0u32; k];
    for _ in 0..k {
        counts[rng.gen_range(0..k)] += 1;
    }
    let keep: Vec<usize> = (0..k).filter(|&i| counts[i] > 0).collect();
    OracleDataset {
        x: data.x.select(&keep),
        y: keep.iter().map(|&i| data.y[i]).collect(),
        w: keep.iter().map(|&i| data.w[i] * f64::from(counts[i])).collect(),
        source: keep.iter().map(|&i| data.source[i]).collect(),
    }
}

/// Runs MARVIN for up to `config.iterations` rounds.
pub fn marvin(l: &LabeledSet, u: &FeatureMatrix, config: &MarvinConfig) -> Result<MarvinRun> {
    if l.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    if u.is_empty() {
        return Err(Error::Empty("unlabeled set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (oracle_l, estimate_l) = match config.labeled_use {
        LabeledUse::Shared => (l.clone(), l.clone()),
        LabeledUse::Split => {
            if l.len() < 2 {
                return Err(Error::invalid("splitting L needs at least two labeled examples"));
            }
            let (a, b) = partition_labeled(l.len(), &mut rng);
            (l.select(&a), l.select(&b))
        }
    };
    let mut batches = Batches::new(u, config.streaming)?;
    let mut state = BoostState::new(batches.get().n_rows());
    let mut trajectory = vec![state.gamma()];
    let mut idle = 0;
    let mut iterations = 0;
    let mut stopped_early = false;
    for t in 1..=config.iterations {
        if batches.advance(t) {
            state.rebatch(batches.get(), &config.wilson)?;
        }
        let mut data = build_oracle_dataset(&oracle_l, batches.get(), state.scores())?;
        if config.bootstrap {
            data = bootstrap(data, &mut rng);
        }
        let h = oracle_best(&data, &config.learner)?;
        let out = state.step(h, &estimate_l, batches.get(), config)?;
        trajectory.push(out.gamma);
        iterations = t;
        log::debug!("marvin iteration {t}: gamma {:.6} ({} added)", out.gamma, out.added);
        if out.gamma < out.gamma_before {
            idle = 0;
        } else {
            idle += 1;
            if idle >= config.patience {
                stopped_early = t < config.iterations;
                break;
            }
        }
    }
    Ok(MarvinRun {
        predictor: state.predictor()?,
        trajectory,
        iterations,
        stopped_early,
        mow: state.mow_report(),
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr_free::normal;

    use super::*;
    use crate::bench::auc;
    use crate::boosters::RowSource;
    use crate::trees::Stump;

    /// Tiny Box-Muller so tests need no extra crates.
    mod rand_distr_free {
        use rand::Rng;

        pub fn normal(rng: &mut impl Rng) -> f64 {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
    }

    /// Two well separated 1-D clusters.
    fn clusters(seed: u64, m: usize, n: usize) -> (LabeledSet, FeatureMatrix, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |k: usize| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for i in 0..k {
                let label: i8 = if i % 2 == 0 { 1 } else { -1 };
                x.push(vec![f64::from(label) * 3.0 + 0.5 * normal(&mut rng)]);
                y.push(label);
            }
            (FeatureMatrix::from_rows(&x).unwrap(), y)
        };
        let (lx, ly) = draw(m);
        let (ux, uy) = draw(n);
        (LabeledSet::new(lx, ly).unwrap(), ux, uy)
    }

    fn config(t: usize, variant: Variant, learner: WeakLearner) -> MarvinConfig {
        MarvinConfig {
            learner,
            ..MarvinConfig::new(t, variant, WilsonParams::new(0.01).unwrap())
        }
    }

    #[test]
    fn labeled_split_and_seeds() {
        let (l, u, _) = clusters(3, 40, 200);
        let tree = config(8, Variant::Corrective, WeakLearner::default());
        let a = marvin(&l, &u, &tree).unwrap();
        let b = marvin(&l, &u, &tree).unwrap();
        assert_eq!(a.predictor, b.predictor);
        let one = l.select(&[0]);
        assert!(marvin(&one, &u, &tree).is_err());
        let shared = MarvinConfig {
            labeled_use: LabeledUse::Shared,
            ..tree
        };
        assert!(marvin(&one, &u, &shared).is_ok());
    }

    #[test]
    fn bootstrap_keeps_positive_weights() {
        let (l, u, _) = clusters(4, 12, 30);
        let data = build_oracle_dataset(&l, &u, &[2.0; 30]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let boot = bootstrap(data.clone(), &mut rng);
        assert!(boot.len() < data.len());
        assert!(boot.w.iter().all(|&w| w > 0.0));
        // weights are the original ones times counts summing to the row count
        let counts: f64 = boot
            .w
            .iter()
            .zip(&boot.source)
            .map(|(w, s)| w * if *s == RowSource::Labeled { 12.0 } else { 30.0 })
            .sum();
        assert!((counts - data.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn zero_iterations_abstain() {
        let (l, u, _) = clusters(1, 10, 20);
        let run = marvin(&l, &u, &config(0, Variant::Plain, WeakLearner::Stump)).unwrap();
        assert!(run.predictor.is_abstaining());
        assert_eq!(run.predictor.predict(&[2.0]).unwrap(), 0.0);
        assert_eq!(run.trajectory, vec![1.0]);
    }

    #[test]
    fn separable_toy_ranks_perfectly() {
        let (l, u, uy) = clusters(2, 50, 500);
        for variant in [Variant::Plain, Variant::Corrective, Variant::Specialists] {
            let run = marvin(&l, &u, &config(10, variant, WeakLearner::Stump)).unwrap();
            let scores = run.predictor.scores(&u).unwrap();
            assert_eq!(auc(&scores, &uy).unwrap(), 1.0, "{variant:?}");
            for w in run.trajectory.windows(2) {
                assert!(w[1] <= w[0], "{variant:?} trajectory rose");
            }
            // muffling: most unlabeled scores stay within the well
            let inside = scores.iter().filter(|s| s.abs() <= 1.0 + 1e-6).count();
            assert!(inside * 2 >= scores.len(), "{variant:?}: {inside}");
        }
    }

    #[test]
    fn trees_and_specialists_descend() {
        let (l, u, _) = clusters(3, 40, 200);
        for variant in [Variant::Plain, Variant::Corrective, Variant::Specialists] {
            let run = marvin(&l, &u, &config(8, variant, WeakLearner::default())).unwrap();
            for w in run.trajectory.windows(2) {
                assert!(w[1] <= w[0], "{variant:?} trajectory rose");
            }
        }
    }

    #[test]
    fn score_cache_matches_recompute() {
        let (l, u, _) = clusters(4, 30, 100);
        for variant in [Variant::Plain, Variant::Corrective, Variant::Specialists] {
            let cfg = config(6, variant, WeakLearner::default());
            let mut state = BoostState::new(u.n_rows());
            for _ in 0..6 {
                let data = build_oracle_dataset(&l, &u, state.scores()).unwrap();
                for (&w, &y) in data.w.iter().zip(&data.y) {
                    assert!(w > 0.0 && y != 0);
                }
                let h = oracle_best(&data, &cfg.learner).unwrap();
                state.step(h, &l, &u, &cfg).unwrap();
                assert!(state.score_drift() <= 1e-10);
                assert!(state.sigma().iter().all(|&s| s >= 0.0));
            }
        }
    }

    #[test]
    fn correction_never_hurts_same_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (l, u, _) = clusters(5, 40, 150);
        let stumps: Vec<Stump> = (0..8)
            .map(|_| Stump {
                feature: 0,
                threshold: rng.gen_range(-2.0..2.0),
                polarity: if rng.gen_bool(0.8) { 1 } else { -1 },
            })
            .collect();
        let plain = config(8, Variant::Plain, WeakLearner::Stump);
        let corrective = config(8, Variant::Corrective, WeakLearner::Stump);
        let mut a = BoostState::new(u.n_rows());
        let mut c = BoostState::new(u.n_rows());
        for s in stumps {
            let ga = a.step(Hypothesis::Stump(s), &l, &u, &plain).unwrap().gamma;
            let gc = c.step(Hypothesis::Stump(s), &l, &u, &corrective).unwrap().gamma;
            assert!(gc <= ga + 1e-9, "{gc} > {ga}");
        }
    }

    #[test]
    fn streaming_runs_and_swaps() {
        let (l, u, uy) = clusters(6, 40, 300);
        let mut cfg = config(12, Variant::Corrective, WeakLearner::Stump);
        let mut stream = StreamConfig::new(100, 1);
        stream.stride = 4;
        cfg.streaming = Some(stream);
        let run = marvin(&l, &u, &cfg).unwrap();
        let scores = run.predictor.scores(&u).unwrap();
        assert!(auc(&scores, &uy).unwrap() > 0.99);
    }

    #[test]
    fn specialist_variant_reports_mowing() {
        let (l, u, _) = clusters(7, 40, 100);
        let run = marvin(&l, &u, &config(3, Variant::Specialists, WeakLearner::default())).unwrap();
        assert!(run.mow.total >= run.mow.kept);
        assert!(run.mow.total > 0);
    }
}
