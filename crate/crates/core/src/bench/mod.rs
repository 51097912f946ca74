//! Data loading, the trial protocol, AUC and reporting.

mod auc;
mod data;
mod histogram;
mod stream;
mod trials;

pub use auc::{auc, auc_pairs};
pub use data::{label_counts, load_csv, load_libsvm, split_protocol, HiddenLabels, LabelColumn, RawDataset, TrialSplit};
pub use histogram::{score_histogram, Bin, Histogram};
pub use stream::{minibatch_stream, MinibatchPolicy, MinibatchStream, StreamConfig, DEFAULT_STRIDE};
pub use trials::{
    confidence_interval, fit_algorithm, monte_carlo, t_quantile, trial_seeds, AlgoParams, Algorithm, BenchConfig,
    BenchReport, Fitted, NodeCounts, TrialResult,
};
