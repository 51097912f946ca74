//! Algorithms under test and the Monte-Carlo trial loop.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::data::{split_protocol, RawDataset};
use super::stream::{MinibatchPolicy, StreamConfig, DEFAULT_STRIDE};
use crate::baselines::{adaboost, logistic_fit};
use crate::boosters::{marvin, MarvinConfig, Variant, WeakLearner};
use crate::data::{FeatureMatrix, LabeledSet};
use crate::error::{Error, Result};
use crate::estimation::{MowReport, WilsonParams};
use crate::hedgemower::{run_hedgemower, HedgeMowerConfig, HedgeMowerVariant};
use crate::model::Model;
use crate::trees::{fit_forest, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Algorithm {
    #[value(name = "marvin")]
    #[serde(rename = "marvin")]
    Marvin,
    #[value(name = "marvin-c")]
    #[serde(rename = "marvin-c")]
    MarvinC,
    #[value(name = "marvin-d")]
    #[serde(rename = "marvin-d")]
    MarvinD,
    #[value(name = "hedgemower")]
    #[serde(rename = "hedgemower")]
    HedgeMower,
    #[value(name = "hedgemower-1")]
    #[serde(rename = "hedgemower-1")]
    HedgeMowerMinusOne,
    #[value(name = "rf")]
    #[serde(rename = "rf")]
    RandomForest,
    #[value(name = "adaboost")]
    #[serde(rename = "adaboost")]
    AdaBoost,
    #[value(name = "logreg")]
    #[serde(rename = "logreg")]
    LogReg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Marvin,
        Algorithm::MarvinC,
        Algorithm::MarvinD,
        Algorithm::HedgeMower,
        Algorithm::HedgeMowerMinusOne,
        Algorithm::RandomForest,
        Algorithm::AdaBoost,
        Algorithm::LogReg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Marvin => "marvin",
            Algorithm::MarvinC => "marvin-c",
            Algorithm::MarvinD => "marvin-d",
            Algorithm::HedgeMower => "hedgemower",
            Algorithm::HedgeMowerMinusOne => "hedgemower-1",
            Algorithm::RandomForest => "rf",
            Algorithm::AdaBoost => "adaboost",
            Algorithm::LogReg => "logreg",
        }
    }

    /// Whether the algorithm reports kept/total specialist counts.
    pub fn has_specialists(self) -> bool {
        matches!(self, Algorithm::MarvinD | Algorithm::HedgeMower)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings shared by every algorithm in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    /// Boosting iterations, forest size or AdaBoost rounds.
    pub trees: usize,
    /// Wilson failure probability; `None` picks the default for `m`.
    pub alpha: Option<f64>,
    /// Weak learner for the MARVIN family and AdaBoost.
    pub learner: WeakLearner,
    pub tree_params: TreeParams,
    /// Unlabeled minibatch size for the MARVIN family; `None` uses all of U.
    pub batch_size: Option<usize>,
    pub stride: usize,
    pub policy: MinibatchPolicy,
    pub logreg_epochs: usize,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            trees: 100,
            alpha: None,
            learner: WeakLearner::default(),
            tree_params: TreeParams::default(),
            batch_size: None,
            stride: DEFAULT_STRIDE,
            policy: MinibatchPolicy::default(),
            logreg_epochs: 500,
        }
    }
}

impl AlgoParams {
    pub fn wilson(&self, m: usize) -> Result<WilsonParams> {
        WilsonParams::new(self.alpha.unwrap_or_else(|| WilsonParams::default_alpha(m)))
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: Model,
    /// Raw scores on the unlabeled rows.
    pub scores: Vec<f64>,
    /// Specialist survivors, candidates and tree count, when applicable.
    pub nodes: Option<(MowReport, usize)>,
    pub abstained: bool,
}

/// Trains `algorithm` on `L` (and `U` where it is semi-supervised) and
/// scores `U`.
pub fn fit_algorithm(algorithm: Algorithm, l: &LabeledSet, u: &FeatureMatrix, params: &AlgoParams, seed: u64) -> Result<Fitted> {
    let wilson = params.wilson(l.len())?;
    let scored = |model: Model| -> Result<Fitted> {
        let scores = model.scores(u)?;
        Ok(Fitted {
            model,
            scores,
            nodes: None,
            abstained: false,
        })
    };
    match algorithm {
        Algorithm::Marvin | Algorithm::MarvinC | Algorithm::MarvinD => {
            let variant = match algorithm {
                Algorithm::Marvin => Variant::Plain,
                Algorithm::MarvinC => Variant::Corrective,
                _ => Variant::Specialists,
            };
            let mut config = MarvinConfig::new(params.trees, variant, wilson);
            config.learner = params.learner;
            config.seed = seed;
            if let Some(batch) = params.batch_size {
                let mut s = StreamConfig::new(batch, seed);
                s.stride = params.stride;
                s.policy = params.policy;
                config.streaming = Some(s);
            }
            let run = marvin(l, u, &config)?;
            let abstained = run.predictor.is_abstaining();
            let mut out = scored(Model::Aggregate(run.predictor))?;
            out.abstained = abstained;
            if variant == Variant::Specialists {
                out.nodes = Some((run.mow, run.iterations.max(1)));
            }
            Ok(out)
        }
        Algorithm::HedgeMower | Algorithm::HedgeMowerMinusOne => {
            let variant = if algorithm == Algorithm::HedgeMower {
                HedgeMowerVariant::Full
            } else {
                HedgeMowerVariant::MinusOne
            };
            let mut config = HedgeMowerConfig::new(params.trees, wilson, variant);
            config.tree_params = params.tree_params;
            let run = run_hedgemower(l, u, &config, seed)?;
            let mut out = scored(Model::Aggregate(run.predictor))?;
            out.abstained = run.abstained;
            if variant == HedgeMowerVariant::Full {
                out.nodes = Some((run.mow, params.trees));
            }
            Ok(out)
        }
        Algorithm::RandomForest => scored(Model::Forest(fit_forest(l, params.trees, seed, &params.tree_params)?)),
        Algorithm::AdaBoost => scored(Model::AdaBoost(adaboost(l, params.trees, &params.learner)?)),
        Algorithm::LogReg => scored(Model::Logistic(logistic_fit(l, params.logreg_epochs, 0.5)?.model)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    /// Labeled examples per trial.
    pub labeled: usize,
    pub trials: usize,
    pub seed: u64,
    pub params: AlgoParams,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(skip)]
    pub jobs: usize,
}

impl BenchConfig {
    pub fn new(algorithms: Vec<Algorithm>, labeled: usize, trials: usize, seed: u64) -> Self {
        Self {
            algorithms,
            labeled,
            trials,
            seed,
            params: AlgoParams::default(),
            jobs: 0,
        }
    }
}

/// Mean specialist counts per tree over the trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub kept: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    pub aucs: Vec<f64>,
    pub mean: f64,
    pub half_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NodeCounts>,
    /// Trials whose predictor abstained everywhere.
    pub abstained: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Two-sided 95% Student-t quantile `t(0.975, dof)`.
pub fn t_quantile(dof: usize) -> Result<f64> {
    let t = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| Error::invalid(format!("t distribution: {e}")))?;
    Ok(t.inverse_cdf(0.975))
}

/// Mean and 95% confidence half-width `t · s / √k` of `values`.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    let k = values.len();
    if k < 2 {
        return Err(Error::invalid("a confidence interval needs at least two values"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    Ok((mean, t_quantile(k - 1)? * var.sqrt() / (k as f64).sqrt()))
}

/// Split and algorithm seeds for one trial, independent of trial order.
pub fn trial_seeds(master: u64, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    (rng.next_u64(), rng.next_u64())
}

struct TrialOutcome {
    auc: f64,
    nodes: Option<(MowReport, usize)>,
    abstained: bool,
    elapsed: Duration,
}

fn run_trial(data: &RawDataset, config: &BenchConfig, trial: usize) -> Result<Vec<TrialOutcome>> {
    let (split_seed, algo_seed) = trial_seeds(config.seed, trial);
    let split = split_protocol(data, config.labeled, split_seed)?;
    let mut out = Vec::with_capacity(config.algorithms.len());
    for &algorithm in &config.algorithms {
        let start = Instant::now();
        let fitted = fit_algorithm(algorithm, &split.labeled, &split.unlabeled, &config.params, algo_seed)?;
        let auc = split.hidden.auc(&fitted.scores)?;
        log::info!("trial {trial} {algorithm}: auc {auc:.4}");
        out.push(TrialOutcome {
            auc,
            nodes: fitted.nodes,
            abstained: fitted.abstained,
            elapsed: start.elapsed(),
        });
    }
    Ok(out)
}

/// Runs every configured algorithm on `trials` independent splits and
/// aggregates AUCs per algorithm. Trials run in parallel; results do not
/// depend on scheduling.
pub fn monte_carlo(data: &RawDataset, config: &BenchConfig) -> Result<Vec<TrialResult>> {
    if config.trials < 2 {
        return Err(Error::invalid("monte carlo needs at least two trials"));
    }
    if config.algorithms.is_empty() {
        return Err(Error::invalid("no algorithms selected"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let per_trial: Vec<Result<Vec<TrialOutcome>>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| {
                run_trial(data, config, t).map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let mut results = Vec::with_capacity(config.algorithms.len());
    for (k, &algorithm) in config.algorithms.iter().enumerate() {
        let outcomes: Vec<&TrialOutcome> = per_trial.iter().map(|t| &t[k]).collect();
        let aucs: Vec<f64> = outcomes.iter().map(|o| o.auc).collect();
        let (mean, half_width) = confidence_interval(&aucs)?;
        let nodes = algorithm.has_specialists().then(|| {
            let (mut kept, mut total) = (0.0, 0.0);
            for o in &outcomes {
                if let Some((mow, trees)) = o.nodes {
                    kept += mow.kept as f64 / trees as f64;
                    total += mow.total as f64 / trees as f64;
                }
            }
            let k = outcomes.len() as f64;
            NodeCounts {
                kept: kept / k,
                total: total / k,
            }
        });
        results.push(TrialResult {
            algorithm,
            aucs,
            mean,
            half_width,
            nodes,
            abstained: outcomes.iter().filter(|o| o.abstained).count(),
            wall_time: outcomes.iter().map(|o| o.elapsed).sum(),
        });
    }
    Ok(results)
}

/// Results file written by `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub dataset: String,
    pub n_examples: usize,
    pub config: BenchConfig,
    pub results: Vec<TrialResult>,
}

impl BenchReport {
    pub fn new(data: &RawDataset, config: &BenchConfig, results: Vec<TrialResult>) -> Self {
        Self {
            schema: 1,
            dataset: data.name.clone(),
            n_examples: data.len(),
            config: config.clone(),
            results,
        }
    }

    /// One line per algorithm: `mean ± half-width`, plus kept/total
    /// specialists per tree where the algorithm has them.
    pub fn table(&self) -> String {
        let mut out = format!("{:<14} {:>17}  {:>15}\n", "algorithm", "AUC", "kept/total");
        for r in &self.results {
            let nodes = r
                .nodes
                .map(|n| format!("{:.1}/{:.1}", n.kept, n.total))
                .unwrap_or_else(|| "-".into());
            out += &format!(
                "{:<14} {:>8.4} ± {:<6.4}  {:>15}\n",
                r.algorithm.name(),
                r.mean,
                r.half_width,
                nodes
            );
        }
        out
    }
}
